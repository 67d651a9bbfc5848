//! Zero-forcing channel diagonalization for the K-user MIMO Y-channel, with
//! exact tools for its degrees-of-freedom region.

// error enums carry exact rationals for diagnostics
#![allow(clippy::result_large_err)]

pub mod alignment;
pub mod channel;
pub mod dof;
pub mod harness;
pub mod linalg;
pub mod region;
pub mod rng;
pub mod transceiver;
