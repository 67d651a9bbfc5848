//! Command-line front end.
//!
//! Exit codes: 0 success, 1 infeasible DoF vector or violated check, 2 usage
//! error. Every subcommand accepts the experiment flags; a `--config` file is
//! read first and flags override it.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use super::config::{db_to_linear, parse_sweep, ConfigFile, ExperimentConfig, SweepSpec};
use super::sweep::run_sweep;
use super::HarnessError;
use crate::alignment::build_stream_plan;
use crate::channel::sample_channels_from;
use crate::dof::directed_pairs;
use crate::linalg::{
    left_diagonalization_residual, normalization_error, normalized_left_mppi, normalized_right_mppi,
    right_diagonalization_residual, PowerNormalization, DIAGONALIZATION_TOL, NORMALIZATION_TOL,
};
use crate::region::{
    construction_feasible, find_construction_gap, is_member, sum_dof_max, vertices_k3, RegionSpec, MAX_VERTEX_ANTENNAS,
};
use crate::rng::{Purpose, RngAddress};
use crate::transceiver::{run_round, DecodeMode, RoundOptions, TransceiverError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutFormat {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "ychannel", version, about = "MIMO Y-channel simulator and DoF-region toolkit")]
struct Cli {
    /// Output format (default: csv for sweep, json otherwise)
    #[arg(long, global = true, value_enum)]
    out: Option<OutFormat>,
    /// Suppress the summary line on stderr
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check pseudo-inverse diagonalization on random channels
    MppiCheck(ExperimentArgs),
    /// Run one transmission round
    Simulate {
        #[command(flatten)]
        experiment: ExperimentArgs,
        /// Transmit power in dB (default: first sweep point)
        #[arg(long, allow_hyphen_values = true)]
        power_db: Option<f64>,
        /// Trial index selecting the channel and noise streams
        #[arg(long, default_value_t = 0)]
        trial: u64,
    },
    /// Monte Carlo power sweep with slope fit
    Sweep(ExperimentArgs),
    /// Print the stream layout for a DoF vector
    Plan(ExperimentArgs),
    /// DoF-region tools
    #[command(subcommand)]
    Dof(DofCommand),
}

#[derive(Debug, Subcommand)]
enum DofCommand {
    /// Region membership and construction feasibility of --dof
    Check(ExperimentArgs),
    /// Maximum sum-DoF with an exact LP certificate
    Sumdof(ExperimentArgs),
    /// Search for region points the direct construction cannot carry
    Gap(ExperimentArgs),
    /// Vertices of the three-user region for --n antennas
    VerticesK3(ExperimentArgs),
}

#[derive(Debug, Clone, Default, Args)]
struct ExperimentArgs {
    /// TOML config file
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Users
    #[arg(long)]
    k: Option<usize>,
    /// Antennas per user
    #[arg(long)]
    m: Option<usize>,
    /// Relay antennas
    #[arg(long)]
    n: Option<usize>,
    /// DoF vector, e.g. `all=1` or `1-2=1/2,2-1=1`
    #[arg(long)]
    dof: Option<String>,
    /// Sweep in dB: start:step:stop or a comma list
    #[arg(long, allow_hyphen_values = true)]
    sweep_db: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    /// genie | raw
    #[arg(long)]
    mode: Option<DecodeMode>,
    /// on | off
    #[arg(long, value_parser = parse_switch)]
    noise: Option<bool>,
    /// unit | power-matched
    #[arg(long, value_parser = parse_normalization)]
    power_normalization: Option<PowerNormalization>,
}

fn parse_switch(s: &str) -> Result<bool, String> {
    match s {
        "on" | "true" => Ok(true),
        "off" | "false" => Ok(false),
        _ => Err(format!("expected on|off, got `{s}`")),
    }
}

fn parse_normalization(s: &str) -> Result<PowerNormalization, String> {
    serde_json::from_value(serde_json::Value::String(s.into())).map_err(|_| format!("expected unit|power-matched, got `{s}`"))
}

impl ExperimentArgs {
    fn resolve(&self) -> Result<ExperimentConfig, HarnessError> {
        let file = match &self.config {
            Some(path) => ConfigFile::load(path)?,
            None => ConfigFile::default(),
        };
        let sweep_db = match &self.sweep_db {
            Some(s) => Some(SweepSpec::List(parse_sweep(s)?)),
            None => None,
        };
        let flags = ConfigFile {
            k: self.k,
            m: self.m,
            n: self.n,
            power_normalization: self.power_normalization,
            dof: self.dof.clone(),
            sweep_db,
            trials: self.trials,
            seed: self.seed,
            mode: self.mode,
            noise: self.noise,
        };
        ExperimentConfig::resolve(file.overridden_by(flags))
    }
}

/// What a subcommand produced: the body and the exit code to report.
struct Outcome {
    body: String,
    code: i32,
    summary: Option<String>,
}

impl Outcome {
    fn ok(body: String) -> Self {
        Self {
            body,
            code: 0,
            summary: None,
        }
    }
}

fn pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("output serializes");
    s.push('\n');
    s
}

fn csv_body(header: &[String], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

fn strings<const N: usize>(v: [&str; N]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn region_of(cfg: &ExperimentConfig) -> Result<RegionSpec, HarnessError> {
    Ok(RegionSpec::new(cfg.system.users, cfg.system.relay_antennas)?)
}

fn mppi_check(cfg: &ExperimentConfig, out: OutFormat) -> Result<Outcome, HarnessError> {
    let mut worst = [0.0f64; 4];
    for trial in 0..cfg.trials as u64 {
        let mut rng = RngAddress::new(cfg.seed).with_trial(trial).rng(Purpose::Channels);
        let ch = sample_channels_from(&cfg.system, &mut rng)?;
        for (h, d) in ch.uplink().iter().zip(ch.downlink()) {
            let hr = normalized_right_mppi(h).map_err(TransceiverError::from)?;
            let dl = normalized_left_mppi(d).map_err(TransceiverError::from)?;
            let values = [
                right_diagonalization_residual(h, &hr),
                normalization_error(&hr.matrix),
                left_diagonalization_residual(d, &dl),
                normalization_error(&dl.matrix),
            ];
            for (w, v) in worst.iter_mut().zip(values) {
                *w = w.max(v);
            }
        }
    }
    let pass = worst[0] <= DIAGONALIZATION_TOL
        && worst[2] <= DIAGONALIZATION_TOL
        && worst[1] <= NORMALIZATION_TOL
        && worst[3] <= NORMALIZATION_TOL;
    let body = match out {
        OutFormat::Json => pretty(&json!({
            "config": cfg.canonical(),
            "channel_sets": cfg.trials,
            "max_uplink_residual": worst[0],
            "max_uplink_normalization_error": worst[1],
            "max_downlink_residual": worst[2],
            "max_downlink_normalization_error": worst[3],
            "residual_tolerance": DIAGONALIZATION_TOL,
            "normalization_tolerance": NORMALIZATION_TOL,
            "pass": pass,
        })),
        OutFormat::Csv => csv_body(
            &strings([
                "channel_sets",
                "max_uplink_residual",
                "max_uplink_normalization_error",
                "max_downlink_residual",
                "max_downlink_normalization_error",
                "pass",
            ]),
            &[std::iter::once(cfg.trials.to_string())
                .chain(worst.iter().map(f64::to_string))
                .chain(std::iter::once(pass.to_string()))
                .collect()],
        ),
    };
    Ok(Outcome {
        body,
        code: if pass { 0 } else { 1 },
        summary: Some(format!("worst residual {:e}, {}", worst[0].max(worst[2]), if pass { "pass" } else { "FAIL" })),
    })
}

fn simulate(cfg: &ExperimentConfig, power_db: Option<f64>, trial: u64, out: OutFormat) -> Result<Outcome, HarnessError> {
    let power_db = power_db.unwrap_or(cfg.sweep_db[0]);
    let system = cfg
        .system
        .with_power(db_to_linear(power_db))
        .map_err(|e| HarnessError::Usage(e.to_string()))?;
    let addr = RngAddress::new(cfg.seed).with_trial(trial);
    let ch = sample_channels_from(&system, &mut addr.rng(Purpose::Channels))?;
    let round = run_round(
        &system,
        &ch,
        &cfg.dof,
        None,
        addr,
        RoundOptions {
            mode: cfg.mode,
            noise: cfg.noise,
        },
    )?;
    let body = match out {
        OutFormat::Json => pretty(&json!({
            "config": cfg.canonical(),
            "power_db": power_db,
            "trial": trial,
            "round": round,
        })),
        OutFormat::Csv => {
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
            let rows: Vec<Vec<String>> = round
                .streams
                .iter()
                .map(|s| {
                    vec![
                        s.from.to_string(),
                        s.to.to_string(),
                        s.estimate.len().to_string(),
                        s.relative_error.to_string(),
                        mean(&s.uplink_snr).to_string(),
                        mean(&s.downlink_snr).to_string(),
                    ]
                })
                .collect();
            csv_body(
                &strings(["from", "to", "symbols", "relative_error", "uplink_snr", "downlink_snr"]),
                &rows,
            )
        }
    };
    Ok(Outcome {
        body,
        code: 0,
        summary: Some(format!("max relative error {:e}", round.max_relative_error())),
    })
}

fn sweep(cfg: &ExperimentConfig, out: OutFormat) -> Result<Outcome, HarnessError> {
    let report = run_sweep(cfg)?;
    let summary = match &report.fit {
        Some(f) => format!("slope {:.4} over {} points", f.slope, f.points),
        None => format!("{} points, no slope fit", report.rows.len()),
    };
    Ok(Outcome {
        body: match out {
            OutFormat::Csv => report.to_csv(),
            OutFormat::Json => report.to_json(),
        },
        code: 0,
        summary: Some(summary),
    })
}

fn plan(cfg: &ExperimentConfig, out: OutFormat) -> Result<Outcome, HarnessError> {
    let plan = build_stream_plan(&cfg.dof, cfg.system.relay_antennas)?;
    Ok(Outcome::ok(match out {
        OutFormat::Json => plan.to_json() + "\n",
        OutFormat::Csv => csv_body(
            &strings(["pair", "offset", "length", "forward", "reverse"]),
            &plan
                .slots
                .iter()
                .map(|s| {
                    vec![
                        s.pair.to_string(),
                        s.offset.to_string(),
                        s.length.to_string(),
                        s.forward.to_string(),
                        s.reverse.to_string(),
                    ]
                })
                .collect::<Vec<_>>(),
        ),
    }))
}

fn dof_check(cfg: &ExperimentConfig, out: OutFormat) -> Result<Outcome, HarnessError> {
    let spec = region_of(cfg)?;
    let verdict = is_member(&cfg.dof, &spec)?;
    let construction = construction_feasible(&cfg.dof, spec.relay_antennas);
    let body = match out {
        OutFormat::Json => pretty(&json!({
            "region": spec,
            "dof": cfg.dof,
            "membership": verdict,
            "construction": construction,
        })),
        OutFormat::Csv => {
            let mut s = format!(
                "# member: {}\n# max: {} at {}\n# pair_max_sum: {}\n# construction_feasible: {}\n",
                verdict.member,
                verdict.max.value,
                one_based(&verdict.max.permutation),
                construction.pair_max_sum,
                construction.feasible
            );
            if let Some(w) = &verdict.witness {
                s.push_str(&format!("# witness: {} = {}\n", one_based(&w.permutation), w.value));
            }
            s.push_str(&csv_body(
                &strings(["permutation", "value", "tight"]),
                &verdict_rows(cfg, &verdict.tight)?,
            ));
            s
        }
    };
    let summary = match &verdict.witness {
        Some(w) => format!("not a member: ordering {} gives {} > {}", one_based(&w.permutation), w.value, verdict.bound),
        None => format!("member ({} tight orderings)", verdict.tight.len()),
    };
    Ok(Outcome {
        body,
        code: if verdict.member { 0 } else { 1 },
        summary: Some(summary),
    })
}

fn one_based(p: &[usize]) -> String {
    p.iter().map(|x| (x + 1).to_string()).collect::<Vec<_>>().join(" ")
}

fn verdict_rows(cfg: &ExperimentConfig, tight: &[Vec<usize>]) -> Result<Vec<Vec<String>>, HarnessError> {
    use itertools::Itertools;
    (0..cfg.system.users)
        .permutations(cfg.system.users)
        .map(|p| {
            let value = crate::region::permutation_constraint(&cfg.dof, &p)?;
            Ok(vec![one_based(&p), value.to_string(), tight.contains(&p).to_string()])
        })
        .collect()
}

fn dof_labels(users: usize) -> Vec<String> {
    directed_pairs(users).iter().map(|(j, k)| format!("{}-{}", j + 1, k + 1)).collect()
}

fn dof_sumdof(cfg: &ExperimentConfig, out: OutFormat) -> Result<Outcome, HarnessError> {
    let spec = region_of(cfg)?;
    let result = sum_dof_max(&spec)?;
    let verified = result.verify();
    let body = match out {
        OutFormat::Json => pretty(&json!({
            "region": spec,
            "sum_dof": result,
            "certificate_verified": verified,
        })),
        OutFormat::Csv => {
            let mut header = strings(["sum_dof", "certificate_verified"]);
            header.extend(dof_labels(spec.users));
            let mut row = vec![result.value.to_string(), verified.to_string()];
            row.extend(result.maximizer.entries().iter().map(|x| x.to_string()));
            csv_body(&header, &[row])
        }
    };
    Ok(Outcome {
        body,
        code: if verified { 0 } else { 1 },
        summary: Some(format!("sum-DoF {}", result.value)),
    })
}

fn dof_gap(cfg: &ExperimentConfig, out: OutFormat) -> Result<Outcome, HarnessError> {
    let spec = region_of(cfg)?;
    let witness = find_construction_gap(&spec)?;
    let body = match out {
        OutFormat::Json => pretty(&json!({ "region": spec, "witness": witness })),
        OutFormat::Csv => {
            let mut header = strings(["selected_sum", "pair_max_sum"]);
            header.extend(dof_labels(spec.users));
            let rows: Vec<Vec<String>> = witness
                .iter()
                .map(|w| {
                    let mut row = vec![w.selected_sum.to_string(), w.pair_max_sum.to_string()];
                    row.extend(w.point.entries().iter().map(|x| x.to_string()));
                    row
                })
                .collect();
            csv_body(&header, &rows)
        }
    };
    let summary = match &witness {
        Some(w) => format!("gap witness {} (pair-max sum {})", w.point.to_spec_string(), w.pair_max_sum),
        None => "no gap".to_string(),
    };
    Ok(Outcome {
        body,
        code: 0,
        summary: Some(summary),
    })
}

fn dof_vertices(cfg: &ExperimentConfig, out: OutFormat) -> Result<Outcome, HarnessError> {
    let n = cfg.system.relay_antennas;
    if n > MAX_VERTEX_ANTENNAS {
        return Err(HarnessError::Usage(format!("vertices-k3 supports N <= {MAX_VERTEX_ANTENNAS}")));
    }
    let vertices = vertices_k3(n);
    let body = match out {
        OutFormat::Json => pretty(&json!({
            "relay_antennas": n,
            "count": vertices.len(),
            "vertices": vertices,
        })),
        OutFormat::Csv => csv_body(
            &dof_labels(3),
            &vertices
                .iter()
                .map(|v| v.entries().iter().map(|x| x.to_string()).collect())
                .collect::<Vec<_>>(),
        ),
    };
    Ok(Outcome {
        body,
        code: 0,
        summary: Some(format!("{} vertices", vertices.len())),
    })
}

fn dispatch(cli: &Cli) -> Result<Outcome, HarnessError> {
    let json_default = cli.out.unwrap_or(OutFormat::Json);
    match &cli.command {
        Command::MppiCheck(a) => mppi_check(&a.resolve()?, json_default),
        Command::Simulate {
            experiment,
            power_db,
            trial,
        } => simulate(&experiment.resolve()?, *power_db, *trial, json_default),
        Command::Sweep(a) => sweep(&a.resolve()?, cli.out.unwrap_or(OutFormat::Csv)),
        Command::Plan(a) => plan(&a.resolve()?, json_default),
        Command::Dof(DofCommand::Check(a)) => dof_check(&a.resolve()?, json_default),
        Command::Dof(DofCommand::Sumdof(a)) => dof_sumdof(&a.resolve()?, json_default),
        Command::Dof(DofCommand::Gap(a)) => dof_gap(&a.resolve()?, json_default),
        Command::Dof(DofCommand::VerticesK3(a)) => dof_vertices(&a.resolve()?, json_default),
    }
}

/// Runs the CLI on `argv` (program name first) and returns the exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                2
            } else {
                let _ = write!(out, "{text}");
                0
            };
        }
    };
    let result = dispatch(&cli).and_then(|o| {
        out.write_all(o.body.as_bytes())
            .and_then(|_| out.flush())
            .map_err(|e| HarnessError::Io(e.to_string()))?;
        Ok(o)
    });
    match result {
        Ok(o) => {
            if let Some(s) = o.summary.filter(|_| !cli.quiet) {
                let _ = writeln!(err, "{s}");
            }
            o.code
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
