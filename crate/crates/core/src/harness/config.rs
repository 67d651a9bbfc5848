//! Experiment configuration: a TOML file, then command-line overrides.
//!
//! Recognized keys (all optional):
//!
//! ```toml
//! k = 4                        # users
//! m = 6                        # antennas per user (default max(6, n))
//! n = 6                        # relay antennas
//! power_normalization = "unit" # or "power-matched"
//! dof = "all=1"                # pair=value list, e.g. "1-2=1/2,2-1=1"
//! sweep_db = "30:5:60"         # start:step:stop, a comma list, or an array
//! trials = 200
//! seed = 1
//! mode = "genie"               # or "raw"
//! noise = true
//! ```
//!
//! Powers are given in dB; `P = 10^(dB / 10)`.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::HarnessError;
use crate::channel::SystemConfig;
use crate::dof::DofVector;
use crate::linalg::PowerNormalization;
use crate::transceiver::DecodeMode;

pub const DEFAULT_USERS: usize = 4;
pub const DEFAULT_USER_ANTENNAS: usize = 6;
pub const DEFAULT_RELAY_ANTENNAS: usize = 6;
pub const DEFAULT_DOF: &str = "all=1";
pub const DEFAULT_SWEEP_DB: &str = "30:5:60";
pub const DEFAULT_TRIALS: usize = 200;
pub const DEFAULT_SEED: u64 = 1;

/// `10^(db / 10)`.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Sweep points in dB as written in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SweepSpec {
    Text(String),
    List(Vec<f64>),
}

impl SweepSpec {
    pub fn points(&self) -> Result<Vec<f64>, HarnessError> {
        match self {
            Self::Text(s) => parse_sweep(s),
            Self::List(v) => Ok(v.clone()),
        }
    }
}

/// `start:step:stop` (inclusive), `a,b,c`, or a single value.
pub fn parse_sweep(text: &str) -> Result<Vec<f64>, HarnessError> {
    let bad = |what: &str| HarnessError::Usage(format!("bad sweep `{text}`: {what}"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad("expected numbers"));
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        [start, step, stop] => {
            let (start, step, stop) = (num(start)?, num(step)?, num(stop)?);
            if step.is_nan() || step <= 0.0 || !start.is_finite() || !stop.is_finite() || stop < start {
                return Err(bad("need a positive step and start <= stop"));
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
            if count > 10_000 {
                return Err(bad("more than 10000 points"));
            }
            Ok((0..count).map(|i| start + i as f64 * step).collect())
        }
        [list] => list.split(',').map(num).collect(),
        _ => Err(bad("expected start:step:stop or a comma list")),
    }
}

/// Contents of a config file; every key optional.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub k: Option<usize>,
    pub m: Option<usize>,
    pub n: Option<usize>,
    pub power_normalization: Option<PowerNormalization>,
    pub dof: Option<String>,
    pub sweep_db: Option<SweepSpec>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub mode: Option<DecodeMode>,
    pub noise: Option<bool>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Usage(format!("bad config: {}", e.message())))
    }

    pub fn load(path: &std::path::Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Usage(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Keys set in `other` replace ours.
    pub fn overridden_by(self, other: ConfigFile) -> Self {
        Self {
            k: other.k.or(self.k),
            m: other.m.or(self.m),
            n: other.n.or(self.n),
            power_normalization: other.power_normalization.or(self.power_normalization),
            dof: other.dof.or(self.dof),
            sweep_db: other.sweep_db.or(self.sweep_db),
            trials: other.trials.or(self.trials),
            seed: other.seed.or(self.seed),
            mode: other.mode.or(self.mode),
            noise: other.noise.or(self.noise),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Power is the first sweep point.
    pub system: SystemConfig,
    pub dof: DofVector,
    pub sweep_db: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub mode: DecodeMode,
    pub noise: bool,
}

/// Flat, fully resolved form used for provenance and hashing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CanonicalConfig {
    pub k: usize,
    pub m: usize,
    pub n: usize,
    pub power_normalization: PowerNormalization,
    pub dof: String,
    pub sweep_db: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub mode: DecodeMode,
    pub noise: bool,
}

impl ExperimentConfig {
    pub fn resolve(file: ConfigFile) -> Result<Self, HarnessError> {
        let users = file.k.unwrap_or(DEFAULT_USERS);
        let relay_antennas = file.n.unwrap_or(DEFAULT_RELAY_ANTENNAS);
        let sweep_db = match file.sweep_db {
            Some(s) => s.points()?,
            None => parse_sweep(DEFAULT_SWEEP_DB)?,
        };
        if sweep_db.is_empty() {
            return Err(HarnessError::Usage("sweep has no points".into()));
        }
        if sweep_db.iter().any(|x| !x.is_finite()) || sweep_db.windows(2).any(|w| w[1] <= w[0]) {
            return Err(HarnessError::Usage("sweep points must be finite and strictly increasing".into()));
        }
        let trials = file.trials.unwrap_or(DEFAULT_TRIALS);
        if trials == 0 {
            return Err(HarnessError::Usage("trials must be at least 1".into()));
        }
        if trials > u32::MAX as usize || sweep_db.len() >= 1 << 24 {
            return Err(HarnessError::Usage("too many trials or sweep points".into()));
        }
        let system = SystemConfig::new(
            users,
            file.m.unwrap_or(DEFAULT_USER_ANTENNAS.max(relay_antennas)),
            relay_antennas,
            db_to_linear(sweep_db[0]),
        )
        .map_err(|e| HarnessError::Usage(e.to_string()))?
        .with_power_normalization(file.power_normalization.unwrap_or_default());
        let dof = DofVector::parse(users, file.dof.as_deref().unwrap_or(DEFAULT_DOF))
            .map_err(|e| HarnessError::Usage(e.to_string()))?;
        Ok(Self {
            system,
            dof,
            sweep_db,
            trials,
            seed: file.seed.unwrap_or(DEFAULT_SEED),
            mode: file.mode.unwrap_or_default(),
            noise: file.noise.unwrap_or(true),
        })
    }

    pub fn canonical(&self) -> CanonicalConfig {
        CanonicalConfig {
            k: self.system.users,
            m: self.system.user_antennas,
            n: self.system.relay_antennas,
            power_normalization: self.system.power_normalization,
            dof: self.dof.to_spec_string(),
            sweep_db: self.sweep_db.clone(),
            trials: self.trials,
            seed: self.seed,
            mode: self.mode,
            noise: self.noise,
        }
    }

    /// Compact JSON of [`Self::canonical`].
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(&self.canonical()).expect("config serializes")
    }

    /// Hex SHA-256 of [`Self::canonical_json`].
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }

    /// System at the power of sweep point `i`.
    pub fn system_at(&self, i: usize) -> SystemConfig {
        self.system
            .with_power(db_to_linear(self.sweep_db[i]))
            .expect("sweep points are finite")
    }
}
