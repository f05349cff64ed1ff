//! Batch harnesses behind the `experiment` subcommand.
//!
//! Five studies, each writing a JSON report plus small CSV tables into the
//! output directory:
//!
//! - `adhesion`: seeded random sub-threshold data, checked to stay bonded;
//! - `longtime`: one run probed for its late-time affine profile;
//! - `linearize`: defect against the force-free beam across amplitudes;
//! - `regularize`: smoothed-law runs converging to the capped law;
//! - `examples`: closed-form replays at two timesteps with observed orders.
//!
//! The examples study replays spatially uniform solutions whose formulas
//! assume unit density and stiffness, so it runs with `rho = mu = 1` on the
//! configured length regardless of the `params` section.

use crate::analysis::{
    adhesion_check, linearization_experiment, long_time_probe, regularization_study,
    verify_no_detachment, AdhesionVerdict, AffineState, AnalysisError, InitialFamily,
    LinearizationReport, RegularizationRow,
};
use crate::config::{auto_stride, ConfigError, ExperimentConfig, FamilyChoice};
use crate::dynamics::{auto_dt, simulate, DynamicsError, SimSetup};
use crate::io::{write_energy_csv, write_json, write_trajectory_csv, RunSummary};
use crate::operator::BeamState;
use crate::oracles::ClosedFormSolution;
use crate::potential::{smoothing_residual, PotentialError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::fs;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error(transparent)]
    Model(#[from] crate::operator::ModelError),
    #[error("failed to write {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

fn io_at(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn ensure_dir(out_dir: &Path) -> Result<(), ExperimentError> {
    fs::create_dir_all(out_dir).map_err(io_at(out_dir))
}

/// One random bonded initial condition and what became of it.
#[derive(Debug, Clone, Serialize)]
pub struct AdhesionCase {
    pub index: usize,
    /// Cosine coefficients of modes 1..=3 before rescaling.
    pub raw_coeffs_u: [f64; 3],
    /// Mode-1 velocity coefficient before rescaling.
    pub raw_coeff_v: f64,
    /// Joint factor that enforced the sup-norm and energy caps.
    pub applied_scale: f64,
    pub verdict: AdhesionVerdict,
    pub sup_abs_displacement: f64,
}

#[derive(Debug, Serialize)]
pub struct AdhesionReport {
    pub harness: &'static str,
    pub seed: u64,
    pub cases: Vec<AdhesionCase>,
    pub all_hypotheses_met: bool,
    pub all_conclusions_hold: bool,
}

/// Draws random low-mode data, scales them under the sup-norm and energy
/// caps, and verifies that every run stays strictly bonded.
pub fn run_adhesion(
    cfg: &ExperimentConfig,
    base_dir: &Path,
    out_dir: &Path,
) -> Result<AdhesionReport, ExperimentError> {
    ensure_dir(out_dir)?;
    let setup0 = cfg.sim.resolve(base_dir)?;
    let (params, grid, spec) = (setup0.params, setup0.grid, setup0.potential);
    let sec = &cfg.adhesion;
    let n = grid.n_points();
    let tau = 2.0 * std::f64::consts::PI / grid.length();
    let dt = auto_dt(&params, &grid);
    let stride = auto_stride(sec.horizon, dt);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.sim.seed);
    let mut cases = Vec::with_capacity(sec.cases);
    for index in 0..sec.cases {
        let cu = [
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        ];
        let cv = rng.gen_range(-1.0..1.0);
        let mut u0: Vec<f64> = (0..n)
            .map(|i| {
                let x = grid.node(i);
                cu[0] * (tau * x).cos()
                    + cu[1] * (2.0 * tau * x).cos()
                    + cu[2] * (3.0 * tau * x).cos()
            })
            .collect();
        let mut v0: Vec<f64> = (0..n).map(|i| cv * (tau * grid.node(i)).cos()).collect();

        let sup_raw = u0.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
        let mut scale = sec.sup_u0 / sup_raw;
        u0.iter_mut().for_each(|x| *x *= scale);
        v0.iter_mut().for_each(|x| *x *= scale);

        let mut verdict = adhesion_check(&params, &grid, &spec, &u0, &v0);
        if verdict.initial_energy > sec.energy_cap {
            // Both densities are quadratic below the threshold, so one more
            // multiplicative factor lands exactly on the cap.
            let shrink = (sec.energy_cap / verdict.initial_energy).sqrt() * (1.0 - 1e-12);
            u0.iter_mut().for_each(|x| *x *= shrink);
            v0.iter_mut().for_each(|x| *x *= shrink);
            scale *= shrink;
            verdict = adhesion_check(&params, &grid, &spec, &u0, &v0);
        }

        let outcome = simulate(&SimSetup {
            params,
            grid,
            potential: spec,
            initial: BeamState::new(0.0, u0, v0),
            horizon: sec.horizon,
            dt,
            record_stride: stride,
        })?;
        let held = verify_no_detachment(&outcome.trajectory) && outcome.sup_abs_displacement < 1.0;
        verdict.conclusion_checked = Some(held);

        let csv = out_dir.join(format!("adhesion_case_{index:02}_energies.csv"));
        write_energy_csv(&csv, &outcome.trajectory).map_err(io_at(&csv))?;

        cases.push(AdhesionCase {
            index,
            raw_coeffs_u: cu,
            raw_coeff_v: cv,
            applied_scale: scale,
            verdict,
            sup_abs_displacement: outcome.sup_abs_displacement,
        });
    }

    let report = AdhesionReport {
        harness: "adhesion",
        seed: cfg.sim.seed,
        all_hypotheses_met: cases.iter().all(|c| c.verdict.hypothesis_met),
        all_conclusions_hold: cases
            .iter()
            .all(|c| c.verdict.conclusion_checked == Some(true)),
        cases,
    };
    let path = out_dir.join("adhesion.json");
    write_json(&path, &report).map_err(io_at(&path))?;
    Ok(report)
}

#[derive(Debug, Serialize)]
pub struct LongtimeReport {
    pub harness: &'static str,
    pub window_fraction: f64,
    pub affine: AffineState,
    pub summary: RunSummary,
}

/// Runs the configured simulation and fits its late-time profile.
pub fn run_longtime(
    cfg: &ExperimentConfig,
    base_dir: &Path,
    out_dir: &Path,
) -> Result<LongtimeReport, ExperimentError> {
    ensure_dir(out_dir)?;
    let setup = cfg.sim.resolve(base_dir)?;
    setup.validate()?;
    let outcome = simulate(&setup)?;
    let affine = long_time_probe(
        &setup.grid,
        &outcome.trajectory,
        cfg.longtime.window_fraction,
    );

    let traj_path = out_dir.join("longtime_trajectory.csv");
    write_trajectory_csv(&traj_path, &setup.grid, &outcome.trajectory)
        .map_err(io_at(&traj_path))?;
    let energy_path = out_dir.join("longtime_energies.csv");
    write_energy_csv(&energy_path, &outcome.trajectory).map_err(io_at(&energy_path))?;

    let report = LongtimeReport {
        harness: "longtime",
        window_fraction: cfg.longtime.window_fraction,
        affine,
        summary: RunSummary::from_outcome(&cfg.sim, &outcome),
    };
    let path = out_dir.join("longtime.json");
    write_json(&path, &report).map_err(io_at(&path))?;
    Ok(report)
}

#[derive(Debug, Serialize)]
pub struct LinearizeReport {
    pub harness: &'static str,
    pub horizon: f64,
    pub rows: Vec<LinearizationReport>,
    /// Defects of the non-skipped rows decrease strictly along the list.
    pub defects_strictly_decreasing: bool,
    pub defect_ratio_last_over_first: Option<f64>,
    pub worst_envelope_ratio: Option<f64>,
}

/// Measures the departure from the force-free beam across amplitudes of the
/// configured initial data.
pub fn run_linearize(
    cfg: &ExperimentConfig,
    base_dir: &Path,
    out_dir: &Path,
) -> Result<LinearizeReport, ExperimentError> {
    ensure_dir(out_dir)?;
    let setup = cfg.sim.resolve(base_dir)?;
    let sec = &cfg.linearize;
    let stride = sec
        .record_stride
        .unwrap_or_else(|| auto_stride(sec.horizon, auto_dt(&setup.params, &setup.grid)));
    let rows = linearization_experiment(
        &setup.params,
        &setup.grid,
        &setup.potential,
        &setup.initial.displacement,
        &setup.initial.velocity,
        &sec.scales,
        sec.horizon,
        stride,
    )?;

    let defects: Vec<f64> = rows.iter().filter_map(|r| r.defect).collect();
    let decreasing = defects.windows(2).all(|w| w[1] < w[0]);
    let ratio = match (defects.first(), defects.last()) {
        (Some(&first), Some(&last)) if defects.len() > 1 && first > 0.0 => Some(last / first),
        _ => None,
    };
    let worst = rows
        .iter()
        .filter_map(|r| r.max_envelope_ratio)
        .fold(None, |acc: Option<f64>, x| {
            Some(acc.map_or(x, |a| a.max(x)))
        });

    let csv_path = out_dir.join("linearize.csv");
    let mut csv = String::from("scale,skipped,defect,max_envelope_ratio\n");
    for r in &rows {
        csv.push_str(&format!(
            "{:.16e},{},{},{}\n",
            r.scale,
            r.skipped,
            r.defect.map_or(String::new(), |d| format!("{d:.16e}")),
            r.max_envelope_ratio
                .map_or(String::new(), |g| format!("{g:.16e}")),
        ));
    }
    fs::write(&csv_path, csv).map_err(io_at(&csv_path))?;

    let report = LinearizeReport {
        harness: "linearize",
        horizon: sec.horizon,
        rows,
        defects_strictly_decreasing: decreasing,
        defect_ratio_last_over_first: ratio,
        worst_envelope_ratio: worst,
    };
    let path = out_dir.join("linearize.json");
    write_json(&path, &report).map_err(io_at(&path))?;
    Ok(report)
}

#[derive(Debug, Serialize)]
pub struct RegularizeReport {
    pub harness: &'static str,
    pub family: FamilyChoice,
    pub horizon: f64,
    pub rows: Vec<RegularizationRow>,
    /// `sup |Phi_eps - Phi|`, one per eps; analytically `eps / 2`.
    pub smoothing_residuals: Vec<f64>,
    pub distances_nonincreasing: bool,
}

/// Convergence history of smoothed-law runs toward the capped law.
pub fn run_regularize(
    cfg: &ExperimentConfig,
    base_dir: &Path,
    out_dir: &Path,
) -> Result<RegularizeReport, ExperimentError> {
    ensure_dir(out_dir)?;
    let setup = cfg.sim.resolve(base_dir)?;
    let sec = &cfg.regularize;
    let family = match sec.family {
        FamilyChoice::BelowThreshold => InitialFamily::BelowThreshold,
        FamilyChoice::AboveThreshold => InitialFamily::AboveThreshold,
    };
    let stride = auto_stride(sec.horizon, auto_dt(&setup.params, &setup.grid));
    let rows = regularization_study(
        &setup.params,
        &setup.grid,
        &family,
        &sec.eps_list,
        sec.horizon,
        stride,
    )?;
    let smoothing_residuals = sec
        .eps_list
        .iter()
        .map(|&e| smoothing_residual(e))
        .collect::<Result<Vec<f64>, _>>()?;
    let nonincreasing = rows
        .windows(2)
        .all(|w| w[1].distance_to_exact <= w[0].distance_to_exact);

    let csv_path = out_dir.join("regularize.csv");
    let mut csv = String::from("eps,distance_to_exact,distance_to_oracle,smoothing_residual\n");
    for (r, res) in rows.iter().zip(&smoothing_residuals) {
        csv.push_str(&format!(
            "{:.16e},{:.16e},{},{:.16e}\n",
            r.eps,
            r.distance_to_exact,
            r.distance_to_oracle
                .map_or(String::new(), |d| format!("{d:.16e}")),
            res,
        ));
    }
    fs::write(&csv_path, csv).map_err(io_at(&csv_path))?;

    let report = RegularizeReport {
        harness: "regularize",
        family: sec.family,
        horizon: sec.horizon,
        rows,
        smoothing_residuals,
        distances_nonincreasing: nonincreasing,
    };
    let path = out_dir.join("regularize.json");
    write_json(&path, &report).map_err(io_at(&path))?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct ExampleCase {
    pub name: &'static str,
    pub dt: f64,
    pub sup_error_dt: f64,
    pub sup_error_half_dt: f64,
    /// `log2(error(dt) / error(dt/2))`; absent when both errors sit at
    /// roundoff.
    pub observed_order: Option<f64>,
    pub roundoff_limited: bool,
    pub energy_formula: f64,
    pub energy_measured: f64,
}

#[derive(Debug, Serialize)]
pub struct ExamplesReport {
    pub harness: &'static str,
    pub eps: f64,
    pub horizon: f64,
    pub cases: Vec<ExampleCase>,
}

/// Replays each closed-form solution at `dt` and `dt/2` and reports the
/// observed convergence order and the energy against its formula.
pub fn run_examples(
    cfg: &ExperimentConfig,
    base_dir: &Path,
    out_dir: &Path,
) -> Result<ExamplesReport, ExperimentError> {
    ensure_dir(out_dir)?;
    let setup0 = cfg.sim.resolve(base_dir)?;
    let grid = setup0.grid;
    // Closed forms assume unit density and stiffness.
    let params = crate::operator::BeamParams::new(1.0, 1.0, grid.length())?;
    let sec = &cfg.examples;
    let n = grid.n_points();
    let mid = n / 2;
    let dt1 = auto_dt(&params, &grid);

    let mut cases = Vec::new();
    for sol in ClosedFormSolution::all_with(sec.eps) {
        let law = sol.law();
        let (u0, v0) = sol.initial();
        let sup_error = |dt: f64| -> Result<f64, ExperimentError> {
            let outcome = simulate(&SimSetup {
                params,
                grid,
                potential: law,
                initial: BeamState::uniform(&grid, u0, v0),
                horizon: sec.horizon,
                dt,
                record_stride: auto_stride(sec.horizon, dt),
            })?;
            Ok(outcome
                .trajectory
                .states
                .iter()
                .map(|s| (s.displacement[mid] - sol.evaluate(s.time).0).abs())
                .fold(0.0, f64::max))
        };
        let e1 = sup_error(dt1)?;
        let e2 = sup_error(dt1 / 2.0)?;
        let floor = 1e-12 * (u0.abs() + v0.abs()).max(1.0);
        let roundoff_limited = e2 < floor;
        let observed_order = if roundoff_limited {
            None
        } else {
            Some((e1 / e2).log2())
        };

        let energy_outcome = simulate(&SimSetup {
            params,
            grid,
            potential: law,
            initial: BeamState::uniform(&grid, u0, v0),
            horizon: dt1 * 2.0,
            dt: dt1,
            record_stride: 1,
        })?;
        cases.push(ExampleCase {
            name: sol.label(),
            dt: dt1,
            sup_error_dt: e1,
            sup_error_half_dt: e2,
            observed_order,
            roundoff_limited,
            energy_formula: sol.energy(grid.length()),
            energy_measured: energy_outcome.trajectory.energies[0].total,
        });
    }

    let csv_path = out_dir.join("examples.csv");
    let mut csv = String::from(
        "name,sup_error_dt,sup_error_half_dt,observed_order,energy_formula,energy_measured\n",
    );
    for c in &cases {
        csv.push_str(&format!(
            "{},{:.16e},{:.16e},{},{:.16e},{:.16e}\n",
            c.name,
            c.sup_error_dt,
            c.sup_error_half_dt,
            c.observed_order
                .map_or(String::new(), |o| format!("{o:.6}")),
            c.energy_formula,
            c.energy_measured,
        ));
    }
    fs::write(&csv_path, csv).map_err(io_at(&csv_path))?;

    let report = ExamplesReport {
        harness: "examples",
        eps: sec.eps,
        horizon: sec.horizon,
        cases,
    };
    let path = out_dir.join("examples.json");
    write_json(&path, &report).map_err(io_at(&path))?;
    Ok(report)
}
