//! Command-line front end for the experiment runner.
//!
//! Usage: `sqg <experiment> [--config file.json] [overrides...]`
//!
//! Exit status: 0 when every report row passed, 1 when any row failed,
//! 2 on configuration or I/O errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use sqg_core::harness::{run, ExperimentConfig, ExperimentKind, RunRecord};
use sqg_core::{Result, SqgError};

#[derive(Parser)]
#[command(
    name = "sqg",
    version,
    about = "Decay-rate experiments for the dissipative surface \
             quasi-geostrophic equation",
    after_help = "Experiments: kernel-scaling, solution-decay, \
                  theorem-remainder, nonlinear-bound, lower-bound, \
                  radial-null.\nOmitted options resolve to tuned \
                  per-experiment defaults. SQG_THREADS caps the worker \
                  pool."
)]
struct Cli {
    /// Experiment to run (overrides the config file's choice).
    experiment: Option<String>,

    /// JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Dissipation exponent in [1, 2].
    #[arg(long)]
    alpha: Option<f64>,

    /// Grid points per side (power of two).
    #[arg(long = "grid-n")]
    grid_n: Option<usize>,

    /// Periodic box side length.
    #[arg(long = "grid-L")]
    grid_l: Option<f64>,

    /// First sample time.
    #[arg(long = "t-min")]
    t_min: Option<f64>,

    /// Last sample time.
    #[arg(long = "t-max")]
    t_max: Option<f64>,

    /// Number of geometrically spaced sample times.
    #[arg(long)]
    samples: Option<usize>,

    /// Output directory for CSV/JSON reports.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Seed recorded with the reports.
    #[arg(long)]
    seed: Option<u64>,

    /// Also write a gnuplot script for the sample series.
    #[arg(long)]
    emit_gnuplot: bool,
}

fn build_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut config = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                SqgError::ConfigInvalid(format!("cannot read config {}: {e}", path.display()))
            })?;
            ExperimentConfig::from_json(&text)?
        }
        None => {
            let name = cli.experiment.as_deref().ok_or_else(|| {
                SqgError::ConfigInvalid("specify an experiment or pass --config".into())
            })?;
            ExperimentConfig::new(parse_kind(name)?)
        }
    };
    if cli.config.is_some() {
        if let Some(name) = &cli.experiment {
            config.experiment = parse_kind(name)?;
        }
    }
    if let Some(v) = cli.alpha {
        config.alpha = v;
    }
    if let Some(v) = cli.grid_n {
        config.grid_n = Some(v);
    }
    if let Some(v) = cli.grid_l {
        config.grid_l = Some(v);
    }
    if let Some(v) = cli.t_min {
        config.t_min = Some(v);
    }
    if let Some(v) = cli.t_max {
        config.t_max = Some(v);
    }
    if let Some(v) = cli.samples {
        config.samples = Some(v);
    }
    if let Some(v) = &cli.out {
        config.out_dir = v.clone();
    }
    if let Some(v) = cli.seed {
        config.seed = v;
    }
    if cli.emit_gnuplot {
        config.emit_gnuplot = true;
    }
    Ok(config)
}

fn parse_kind(name: &str) -> Result<ExperimentKind> {
    ExperimentKind::from_name(name).ok_or_else(|| {
        let known: Vec<&str> = ExperimentKind::all().iter().map(|k| k.name()).collect();
        SqgError::ConfigInvalid(format!(
            "unknown experiment {name:?}; expected one of: {}",
            known.join(", ")
        ))
    })
}

fn print_record(record: &RunRecord) {
    for row in &record.rows {
        let verdict = if row.passed { "PASS" } else { "FAIL" };
        println!(
            "[{verdict}] {} alpha={} p={} mode=\"{}\" value={:.6} \
             target={:.6} tol={:.3e} window=[{}, {}]x{}",
            row.experiment,
            row.alpha,
            if row.p.is_finite() {
                format!("{}", row.p)
            } else {
                "inf".to_string()
            },
            row.mode,
            row.fitted_slope,
            row.target_exponent,
            row.tolerance,
            row.t_min,
            row.t_max,
            row.n_samples,
        );
    }
    let n_pass = record.rows.iter().filter(|r| r.passed).count();
    println!(
        "{n_pass}/{} criteria passed; reports: {} {} {}",
        record.rows.len(),
        record.csv_path,
        record.series_path,
        record.json_path,
    );
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match build_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("sqg: {e}");
            return ExitCode::from(2);
        }
    };
    match run(&config) {
        Ok(record) => {
            print_record(&record);
            if record.all_passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("sqg: experiment {} failed: {e}", config.experiment.name());
            ExitCode::from(2)
        }
    }
}
