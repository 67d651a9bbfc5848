//! Sweep reports as CSV or JSON.
//!
//! CSV layout (`ychannel-sweep/1`): `#`-prefixed provenance lines (schema,
//! config JSON, config SHA-256, seed, code version, fit), then a header row and
//! one row per sweep point:
//!
//! ```text
//! power_db,power_linear,snr_1-2,...,rate_1-2,...,sum_rate,error_mean,error_max,power_violations
//! ```
//!
//! `snr_j-k` is the mean effective SNR (linear) of stream `j -> k`, `rate_j-k`
//! its mean rate proxy in bits per channel use. Numbers use Rust's shortest
//! round-trip formatting. The JSON form carries the same fields.

use serde::Serialize;

use super::config::{CanonicalConfig, ExperimentConfig};
use super::fit::SlopeFit;

pub const SWEEP_SCHEMA: &str = "ychannel-sweep/1";
pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub schema: &'static str,
    pub config: CanonicalConfig,
    pub config_sha256: String,
    pub seed: u64,
    pub code_version: &'static str,
}

impl Provenance {
    pub fn of(cfg: &ExperimentConfig) -> Self {
        Self {
            schema: SWEEP_SCHEMA,
            config: cfg.canonical(),
            config_sha256: cfg.hash(),
            seed: cfg.seed,
            code_version: CODE_VERSION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub power_db: f64,
    pub power_linear: f64,
    pub stream_snr: Vec<f64>,
    pub stream_rate: Vec<f64>,
    pub sum_rate: f64,
    pub error_mean: f64,
    pub error_max: f64,
    pub power_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub provenance: Provenance,
    /// `j-k` labels of the active streams, in column order.
    pub streams: Vec<String>,
    pub rows: Vec<SweepRow>,
    /// Least-squares fit of sum rate against `log2 P`; present with 3+ points.
    pub fit: Option<SlopeFit>,
}

impl SweepReport {
    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["power_db".to_string(), "power_linear".to_string()];
        h.extend(self.streams.iter().map(|s| format!("snr_{s}")));
        h.extend(self.streams.iter().map(|s| format!("rate_{s}")));
        h.extend(["sum_rate", "error_mean", "error_max", "power_violations"].map(String::from));
        h
    }

    pub fn to_csv(&self) -> String {
        let p = &self.provenance;
        let mut out = String::new();
        out.push_str(&format!("# schema: {}\n", p.schema));
        out.push_str(&format!(
            "# config: {}\n",
            serde_json::to_string(&p.config).expect("config serializes")
        ));
        out.push_str(&format!("# config_sha256: {}\n", p.config_sha256));
        out.push_str(&format!("# seed: {}\n", p.seed));
        out.push_str(&format!("# code_version: {}\n", p.code_version));
        if let Some(f) = &self.fit {
            let stderr = f.slope_stderr.map_or("none".to_string(), |s| s.to_string());
            out.push_str(&format!(
                "# fit: slope={} intercept={} residual={} slope_stderr={}\n",
                f.slope, f.intercept, f.residual, stderr
            ));
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.header()).expect("in-memory write");
        for r in &self.rows {
            let mut rec = vec![r.power_db.to_string(), r.power_linear.to_string()];
            rec.extend(r.stream_snr.iter().chain(&r.stream_rate).map(f64::to_string));
            rec.extend([r.sum_rate, r.error_mean, r.error_max].map(|x| x.to_string()));
            rec.push(r.power_violations.to_string());
            w.write_record(&rec).expect("in-memory write");
        }
        out.push_str(std::str::from_utf8(&w.into_inner().expect("in-memory flush")).expect("csv is utf-8"));
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}
