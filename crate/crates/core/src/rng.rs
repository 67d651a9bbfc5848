//! Seeded, stream-addressed random numbers.
//!
//! Generator: ChaCha20 (20 rounds) as implemented by `rand_chacha` 0.3. The
//! 256-bit key is the seed in little-endian order followed by 24 zero bytes;
//! the 64-bit stream id selects an independent keystream; the block counter
//! starts at zero. A `u64` draw consumes two consecutive 32-bit output words,
//! low word first.
//!
//! Uniforms are `(next_u64 >> 11) * 2^-53` in `[0, 1)`. A circularly-symmetric
//! complex Gaussian `CN(0, 1)` sample uses two uniforms `u1, u2`:
//! `r = sqrt(-ln(1 - u1))`, `theta = 2 pi u2`, `z = r cos(theta) + i r sin(theta)`.

use num_complex::Complex64;
use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

use crate::linalg::CVector;

#[derive(Clone, Debug)]
pub struct StreamRng {
    inner: ChaCha20Rng,
}

impl StreamRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        let mut inner = ChaCha20Rng::from_seed(key);
        inner.set_stream(stream);
        Self { inner }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)` with 53 bits of resolution.
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// One `CN(0, 1)` sample: unit total variance, `1/2` per real dimension.
    pub fn complex_gaussian(&mut self) -> Complex64 {
        let u1 = self.uniform();
        let u2 = self.uniform();
        let r = (-(1.0 - u1).ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        Complex64::new(r * theta.cos(), r * theta.sin())
    }

    pub fn complex_gaussian_vec(&mut self, len: usize) -> CVector {
        CVector::from_fn(len, |_, _| self.complex_gaussian())
    }
}

/// What a stream is used for inside one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Channels = 0,
    Symbols = 1,
    RelayNoise = 2,
    UserNoise = 3,
    Awgn = 4,
}

/// Stream id layout: bits 32..64 trial index, bits 8..32 sweep point, bits 0..8 purpose.
pub fn stream_id(trial: u64, point: u64, purpose: Purpose) -> u64 {
    debug_assert!(trial < (1 << 32) && point < (1 << 24));
    (trial << 32) | (point << 8) | purpose as u64
}

/// A seed plus the trial and sweep-point coordinates of one simulated round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RngAddress {
    pub seed: u64,
    pub trial: u64,
    pub point: u64,
}

impl RngAddress {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            trial: 0,
            point: 0,
        }
    }

    pub fn with_trial(self, trial: u64) -> Self {
        Self { trial, ..self }
    }

    pub fn with_point(self, point: u64) -> Self {
        Self { point, ..self }
    }

    pub fn rng(&self, purpose: Purpose) -> StreamRng {
        StreamRng::new(self.seed, stream_id(self.trial, self.point, purpose))
    }
}

impl From<u64> for RngAddress {
    fn from(seed: u64) -> Self {
        Self::new(seed)
    }
}
