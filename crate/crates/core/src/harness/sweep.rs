//! Seeded Monte Carlo power sweep.
//!
//! Trial `t` draws its channels from stream `(t, point 0, channels)` and
//! keeps them for every sweep point; symbols and noise at point `i` come
//! from `(t, i, ...)`. Trials run in parallel and are folded back in trial
//! order, so the report does not depend on scheduling.

use rayon::prelude::*;

use super::config::{db_to_linear, ExperimentConfig};
use super::fit::fit_slope;
use super::report::{Provenance, SweepReport, SweepRow};
use super::HarnessError;
use crate::alignment::build_stream_plan;
use crate::channel::sample_channels_from;
use crate::rng::{Purpose, RngAddress};
use crate::transceiver::{effective_snr, run_round_with, PrecoderSet, RoundOptions};

struct PointSample {
    stream_snr: Vec<f64>,
    stream_rate: Vec<f64>,
    sum_rate: f64,
    error_mean: f64,
    error_max: f64,
    power_ok: bool,
}

fn run_trial(cfg: &ExperimentConfig, trial: u64) -> Result<Vec<PointSample>, HarnessError> {
    let addr = RngAddress::new(cfg.seed).with_trial(trial);
    let ch = sample_channels_from(&cfg.system, &mut addr.rng(Purpose::Channels))?;
    let precoders = PrecoderSet::compute(&ch).map_err(crate::transceiver::TransceiverError::from)?;
    let plan = build_stream_plan(&cfg.dof, cfg.system.relay_antennas)?;
    let options = RoundOptions {
        mode: cfg.mode,
        noise: cfg.noise,
    };
    (0..cfg.sweep_db.len())
        .map(|i| {
            let system = cfg.system_at(i);
            let snr = effective_snr(&system, &precoders, &plan, cfg.mode)?;
            let round = run_round_with(&system, &ch, &precoders, &cfg.dof, None, addr.with_point(i as u64), options)?;
            Ok(PointSample {
                stream_snr: snr.streams.iter().map(|s| s.mean_effective()).collect(),
                stream_rate: snr.stream_rates.clone(),
                sum_rate: snr.rate_proxy,
                error_mean: round.mean_relative_error(),
                error_max: round.max_relative_error(),
                power_ok: round.power_ok,
            })
        })
        .collect()
}

/// Runs every trial at every sweep point and aggregates per point.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepReport, HarnessError> {
    let plan = build_stream_plan(&cfg.dof, cfg.system.relay_antennas)?;
    let streams: Vec<String> = plan
        .active_streams()
        .iter()
        .map(|(j, k)| format!("{}-{}", j + 1, k + 1))
        .collect();

    let trials: Vec<Vec<PointSample>> = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|t| run_trial(cfg, t))
        .collect::<Result<_, _>>()?;

    let count = cfg.trials as f64;
    let rows: Vec<SweepRow> = cfg
        .sweep_db
        .iter()
        .enumerate()
        .map(|(i, &db)| {
            let mut stream_snr = vec![0.0; streams.len()];
            let mut stream_rate = vec![0.0; streams.len()];
            let (mut sum_rate, mut error_mean, mut error_max) = (0.0, 0.0, 0.0f64);
            let mut power_violations = 0;
            for trial in &trials {
                let s = &trial[i];
                for (acc, x) in stream_snr.iter_mut().zip(&s.stream_snr) {
                    *acc += x;
                }
                for (acc, x) in stream_rate.iter_mut().zip(&s.stream_rate) {
                    *acc += x;
                }
                sum_rate += s.sum_rate;
                error_mean += s.error_mean;
                error_max = error_max.max(s.error_max);
                power_violations += usize::from(!s.power_ok);
            }
            stream_snr.iter_mut().chain(stream_rate.iter_mut()).for_each(|x| *x /= count);
            SweepRow {
                power_db: db,
                power_linear: db_to_linear(db),
                stream_snr,
                stream_rate,
                sum_rate: sum_rate / count,
                error_mean: error_mean / count,
                error_max,
                power_violations,
            }
        })
        .collect();

    let fit = if rows.len() >= 3 {
        let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.power_linear.log2(), r.sum_rate)).collect();
        Some(fit_slope(&pts)?)
    } else {
        None
    };
    Ok(SweepReport {
        provenance: Provenance::of(cfg),
        streams,
        rows,
        fit,
    })
}
