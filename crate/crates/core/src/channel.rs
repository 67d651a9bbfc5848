//! System configuration, random block-constant channels, and noisy propagation.
//!
//! Uplink: `y_r = sum_j H_j x_j + z_r` with `H_j` of size `N x M`.
//! Downlink: `y_k = D_k x_r + z_k` with `D_k` of size `M x N`.
//! All noise is `CN(0, I)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{condition_diagnostics, CVector, ComplexMatrix, LinalgError, PowerNormalization, RANK_RATIO_MIN};
use crate::rng::{Purpose, RngAddress, StreamRng};

/// Per-component noise variance at every receiver.
pub const NOISE_VARIANCE: f64 = 1.0;
/// Relative slack allowed by [`check_power`].
pub const POWER_SLACK: f64 = 1e-9;
/// Total matrix rejections tolerated by [`sample_channels`].
pub const MAX_CHANNEL_REJECTIONS: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("invalid system configuration: {0}")]
    InvalidConfig(String),
    #[error("channel generation failed after {0} rejected matrices")]
    GenerationFailed(usize),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// K users with M antennas each, a relay with N antennas, transmit power P.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub users: usize,
    pub user_antennas: usize,
    pub relay_antennas: usize,
    /// Linear transmit power of every node.
    pub power: f64,
    #[serde(default)]
    pub power_normalization: PowerNormalization,
}

impl SystemConfig {
    pub fn new(
        users: usize,
        user_antennas: usize,
        relay_antennas: usize,
        power: f64,
    ) -> Result<Self, ChannelError> {
        let cfg = Self {
            users,
            user_antennas,
            relay_antennas,
            power,
            power_normalization: PowerNormalization::Unit,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_power(self, power: f64) -> Result<Self, ChannelError> {
        let cfg = Self { power, ..self };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_power_normalization(self, power_normalization: PowerNormalization) -> Self {
        Self {
            power_normalization,
            ..self
        }
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        if self.users < 3 {
            return Err(ChannelError::InvalidConfig(format!(
                "need at least 3 users, got {}",
                self.users
            )));
        }
        if self.relay_antennas == 0 || self.relay_antennas > self.user_antennas {
            return Err(ChannelError::InvalidConfig(format!(
                "need 1 <= N <= M, got N = {}, M = {}",
                self.relay_antennas, self.user_antennas
            )));
        }
        if !(self.power.is_finite() && self.power > 0.0) {
            return Err(ChannelError::InvalidConfig(format!(
                "power must be positive and finite, got {}",
                self.power
            )));
        }
        Ok(())
    }

    pub fn noise_variance(&self) -> f64 {
        NOISE_VARIANCE
    }
}

/// Uplink matrices `H_j` (N x M) and downlink matrices `D_j` (M x N), one pair per user.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    uplink: Vec<ComplexMatrix>,
    downlink: Vec<ComplexMatrix>,
}

fn is_full_rank(m: &ComplexMatrix) -> bool {
    condition_diagnostics(m).reciprocal_condition() >= RANK_RATIO_MIN
}

impl ChannelSet {
    pub fn new(uplink: Vec<ComplexMatrix>, downlink: Vec<ComplexMatrix>) -> Result<Self, ChannelError> {
        if uplink.is_empty() || uplink.len() != downlink.len() {
            return Err(ChannelError::InvalidConfig(format!(
                "{} uplink and {} downlink matrices",
                uplink.len(),
                downlink.len()
            )));
        }
        let (n, m) = uplink[0].shape();
        for (j, (h, d)) in uplink.iter().zip(&downlink).enumerate() {
            if h.shape() != (n, m) || d.shape() != (m, n) {
                return Err(LinalgError::Dimension(format!(
                    "user {}: H is {:?}, D is {:?}, expected ({n}, {m}) and ({m}, {n})",
                    j + 1,
                    h.shape(),
                    d.shape()
                ))
                .into());
            }
            if !is_full_rank(h) || !is_full_rank(d) {
                let ratio = condition_diagnostics(h)
                    .reciprocal_condition()
                    .min(condition_diagnostics(d).reciprocal_condition());
                return Err(LinalgError::RankDeficient { ratio }.into());
            }
        }
        Ok(Self { uplink, downlink })
    }

    pub fn users(&self) -> usize {
        self.uplink.len()
    }

    pub fn relay_antennas(&self) -> usize {
        self.uplink[0].rows()
    }

    pub fn user_antennas(&self) -> usize {
        self.uplink[0].cols()
    }

    pub fn uplink(&self) -> &[ComplexMatrix] {
        &self.uplink
    }

    pub fn downlink(&self) -> &[ComplexMatrix] {
        &self.downlink
    }

    pub fn matches(&self, cfg: &SystemConfig) -> bool {
        self.users() == cfg.users
            && self.relay_antennas() == cfg.relay_antennas
            && self.user_antennas() == cfg.user_antennas
    }
}

fn gaussian_matrix(rows: usize, cols: usize, rng: &mut StreamRng) -> ComplexMatrix {
    let entries = (0..rows * cols).map(|_| rng.complex_gaussian()).collect();
    ComplexMatrix::from_row_major(rows, cols, entries).expect("gaussian samples are finite")
}

/// Draws i.i.d. `CN(0, 1)` channels from the channel stream of `seed`.
pub fn sample_channels(cfg: &SystemConfig, seed: u64) -> Result<ChannelSet, ChannelError> {
    sample_channels_from(cfg, &mut RngAddress::new(seed).rng(Purpose::Channels))
}

/// Draws `H_1, D_1, H_2, D_2, ...` in that order, redrawing any matrix that
/// fails the rank check.
pub fn sample_channels_from(cfg: &SystemConfig, rng: &mut StreamRng) -> Result<ChannelSet, ChannelError> {
    cfg.validate()?;
    let (n, m) = (cfg.relay_antennas, cfg.user_antennas);
    let mut rejections = 0;
    let mut draw = |rows, cols, rng: &mut StreamRng| loop {
        let mat = gaussian_matrix(rows, cols, rng);
        if is_full_rank(&mat) {
            return Ok(mat);
        }
        rejections += 1;
        if rejections >= MAX_CHANNEL_REJECTIONS {
            return Err(ChannelError::GenerationFailed(rejections));
        }
    };
    let mut uplink = Vec::with_capacity(cfg.users);
    let mut downlink = Vec::with_capacity(cfg.users);
    for _ in 0..cfg.users {
        uplink.push(draw(n, m, rng)?);
        downlink.push(draw(m, n, rng)?);
    }
    ChannelSet::new(uplink, downlink)
}

fn add_noise(mut y: CVector, noise: Option<&CVector>) -> Result<CVector, ChannelError> {
    if let Some(z) = noise {
        if z.len() != y.len() {
            return Err(LinalgError::Dimension(format!(
                "noise length {} for a received vector of length {}",
                z.len(),
                y.len()
            ))
            .into());
        }
        y += z;
    }
    Ok(y)
}

/// `sum_j H_j x_j + z_r`.
pub fn uplink_propagate(
    ch: &ChannelSet,
    x: &[CVector],
    noise: Option<&CVector>,
) -> Result<CVector, ChannelError> {
    if x.len() != ch.users() {
        return Err(LinalgError::Dimension(format!(
            "{} transmit vectors for {} users",
            x.len(),
            ch.users()
        ))
        .into());
    }
    let mut y = CVector::zeros(ch.relay_antennas());
    for (h, xj) in ch.uplink.iter().zip(x) {
        y += h.apply(xj)?;
    }
    add_noise(y, noise)
}

/// `D_k x_r + z_k`.
pub fn downlink_propagate(
    d: &ComplexMatrix,
    x_r: &CVector,
    noise: Option<&CVector>,
) -> Result<CVector, ChannelError> {
    add_noise(d.apply(x_r)?, noise)
}

/// `CN(0, I)` noise of length `dim` from the AWGN stream of `seed`.
pub fn sample_awgn(dim: usize, seed: u64) -> CVector {
    RngAddress::new(seed).rng(Purpose::Awgn).complex_gaussian_vec(dim)
}

/// `||x||^2 <= P (1 + 1e-9)`.
pub fn check_power(x: &CVector, power: f64) -> bool {
    x.norm_squared() <= power * (1.0 + POWER_SLACK)
}
