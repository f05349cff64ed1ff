//! Command-line front end.
//!
//! `run` executes one simulation from a JSON config and writes trajectory and
//! energy CSVs plus a JSON summary. `experiment` dispatches one of the batch
//! harnesses. Output lands in `--out`, else `$BEAMLAB_OUT`, else `./out`.
//!
//! Exit codes: 0 on success, 1 for validation problems (unreadable or invalid
//! config, timestep above the stability limit), 2 for numerical failures
//! (nonfinite state mid-run, energy gain beyond tolerance under the capped
//! law).

use beamlab::analysis::AnalysisError;
use beamlab::config::{ExperimentConfig, SimConfig};
use beamlab::dynamics::{simulate, DynamicsError};
use beamlab::experiments::{
    run_adhesion, run_examples, run_linearize, run_longtime, run_regularize, ExperimentError,
};
use beamlab::io::{write_energy_csv, write_json, write_trajectory_csv, RunSummary};
use clap::{Parser, Subcommand, ValueEnum};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Status line to stdout. Write errors are dropped so a closed pipe
/// (`beamlab ... | head`) ends the output, not the process.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

#[derive(Parser)]
#[command(
    name = "beamlab",
    version,
    about = "Flexural beam on a breakable adhesive foundation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write trajectory, energies, and a summary.
    Run {
        /// JSON run description.
        #[arg(long)]
        config: PathBuf,
        /// Output directory (default: $BEAMLAB_OUT, then ./out).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a batch harness and write its report.
    Experiment {
        #[arg(value_enum)]
        name: Harness,
        /// JSON experiment description (a `sim` section plus options).
        #[arg(long)]
        config: PathBuf,
        /// Output directory (default: $BEAMLAB_OUT, then ./out).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Harness {
    Adhesion,
    Longtime,
    Linearize,
    Regularize,
    Examples,
}

const EXIT_VALIDATION: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;

type Failure = (u8, String);

fn out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os("BEAMLAB_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn dynamics_exit(err: &DynamicsError) -> u8 {
    match err {
        DynamicsError::NonFiniteState { .. } => EXIT_NUMERICAL,
        _ => EXIT_VALIDATION,
    }
}

fn experiment_exit(err: &ExperimentError) -> u8 {
    match err {
        ExperimentError::Dynamics(e) => dynamics_exit(e),
        ExperimentError::Analysis(AnalysisError::Dynamics(e)) => dynamics_exit(e),
        _ => EXIT_VALIDATION,
    }
}

fn validation<E: std::fmt::Display>(err: E) -> Failure {
    (EXIT_VALIDATION, err.to_string())
}

fn run_command(config_path: &Path, out: &Path) -> Result<(), Failure> {
    let (cfg, base_dir) = SimConfig::from_path(config_path).map_err(validation)?;
    let setup = cfg.resolve(&base_dir).map_err(validation)?;
    setup.validate().map_err(validation)?;
    let outcome = simulate(&setup).map_err(|e| (dynamics_exit(&e), e.to_string()))?;

    std::fs::create_dir_all(out).map_err(validation)?;
    let trajectory_path = out.join("trajectory.csv");
    write_trajectory_csv(&trajectory_path, &setup.grid, &outcome.trajectory).map_err(validation)?;
    let energies_path = out.join("energies.csv");
    write_energy_csv(&energies_path, &outcome.trajectory).map_err(validation)?;
    let summary = RunSummary::from_outcome(&cfg, &outcome);
    let summary_path = out.join("summary.json");
    write_json(&summary_path, &summary).map_err(validation)?;

    say!(
        "run: {} records to t = {:.6e}, energy drift max |{:.3e}|, artifacts in {}",
        summary.n_records,
        summary.final_time,
        summary.dissipation.max_abs_drift,
        out.display()
    );
    if outcome.dissipation.violates_dissipation {
        return Err((
            EXIT_NUMERICAL,
            format!(
                "capped-law run gained energy: max signed drift {:.3e} exceeds tolerance",
                outcome.dissipation.max_signed_drift
            ),
        ));
    }
    Ok(())
}

fn experiment_command(name: Harness, config_path: &Path, out: &Path) -> Result<(), Failure> {
    let (cfg, base_dir) = ExperimentConfig::from_path(config_path).map_err(validation)?;
    let fail = |e: ExperimentError| (experiment_exit(&e), e.to_string());
    match name {
        Harness::Adhesion => {
            let report = run_adhesion(&cfg, &base_dir, out).map_err(fail)?;
            say!(
                "adhesion: {} cases, hypotheses met: {}, stayed bonded: {}",
                report.cases.len(),
                report.all_hypotheses_met,
                report.all_conclusions_hold
            );
        }
        Harness::Longtime => {
            let report = run_longtime(&cfg, &base_dir, out).map_err(fail)?;
            say!(
                "longtime: classified {:?} (fit {:.3e} + {:.3e} x, residual {:.3e})",
                report.affine.classification,
                report.affine.a,
                report.affine.b,
                report.affine.residual
            );
        }
        Harness::Linearize => {
            let report = run_linearize(&cfg, &base_dir, out).map_err(fail)?;
            let envelope = report
                .worst_envelope_ratio
                .map_or("n/a".to_string(), |r| format!("{r:.3}"));
            say!(
                "linearize: {} scales, defects decreasing: {}, worst envelope ratio: {envelope}",
                report.rows.len(),
                report.defects_strictly_decreasing,
            );
        }
        Harness::Regularize => {
            let report = run_regularize(&cfg, &base_dir, out).map_err(fail)?;
            say!(
                "regularize: {} widths, distances nonincreasing: {}",
                report.rows.len(),
                report.distances_nonincreasing
            );
        }
        Harness::Examples => {
            let report = run_examples(&cfg, &base_dir, out).map_err(fail)?;
            let worst = report
                .cases
                .iter()
                .map(|c| {
                    (c.energy_measured - c.energy_formula).abs()
                        / c.energy_formula.abs().max(1e-300)
                })
                .fold(0.0, f64::max);
            say!(
                "examples: {} replays, worst relative energy error {:.3e}",
                report.cases.len(),
                worst
            );
        }
    }
    say!("report written to {}", out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out } => {
            let out = out_dir(out);
            run_command(&config, &out)
        }
        Command::Experiment { name, config, out } => {
            let out = out_dir(out);
            experiment_command(name, &config, &out)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, message)) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}
