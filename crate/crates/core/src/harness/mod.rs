//! Experiment configuration, Monte Carlo sweeps, slope fitting, reports and
//! the command-line interface.

pub mod cli;
pub mod config;
pub mod fit;
pub mod report;
pub mod sweep;

use thiserror::Error;

use crate::alignment::PlanError;
use crate::channel::ChannelError;
use crate::region::RegionError;
use crate::transceiver::TransceiverError;

pub use config::{db_to_linear, parse_sweep, ConfigFile, ExperimentConfig};
pub use fit::{fit_slope, FitError, SlopeFit};
pub use report::{SweepReport, SweepRow};
pub use sweep::run_sweep;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Transceiver(#[from] TransceiverError),
    #[error(transparent)]
    Region(#[from] RegionError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error("cannot write output: {0}")]
    Io(String),
}

impl HarnessError {
    /// Process exit code: 2 for usage problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) | Self::Region(RegionError::TooLarge { .. } | RegionError::Invalid(_)) => 2,
            _ => 1,
        }
    }
}
