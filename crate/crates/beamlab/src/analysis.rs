//! Model-level diagnostics built on top of the stepper.
//!
//! Four questions are answered here. Does low-energy data stay bonded? What
//! does a run settle into over long horizons (rest, or an affine detached
//! profile)? How far does the nonlinear flow drift from the force-free beam,
//! and does that drift respect the Duhamel-type energy envelope? And how fast
//! do runs under the smoothed law converge to the capped law as the shoulder
//! width shrinks?

use crate::dynamics::{
    acceleration_with, auto_dt, energy, simulate, DynamicsError, SimSetup, Trajectory,
};
use crate::operator::{discrete_curvature, l2_norm, trapezoid, BeamParams, BeamState, Grid};
use crate::oracles::ClosedFormSolution;
use crate::potential::{PotentialError, PotentialSpec};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("eps list must be strictly decreasing within (0, 2), got {0:?}")]
    BadEpsList(Vec<f64>),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Potential(#[from] PotentialError),
}

/// Energy level below which bonded data provably stay bonded:
/// `4 kappa mu / max(3, 2 kappa)`, never more than `2 mu`.
pub fn adhesion_threshold(spec: &PotentialSpec, mu: f64) -> f64 {
    4.0 * spec.kappa * mu / (2.0 * spec.kappa).max(3.0)
}

/// Outcome of testing initial data against the no-detachment criterion.
#[derive(Debug, Clone, Serialize)]
pub struct AdhesionVerdict {
    pub sup_norm_u0: f64,
    pub initial_energy: f64,
    pub threshold: f64,
    /// Both hypotheses hold: energy below threshold, data strictly bonded.
    pub hypothesis_met: bool,
    /// Filled in by callers that actually ran the dynamics.
    pub conclusion_checked: Option<bool>,
}

pub fn adhesion_check(
    params: &BeamParams,
    grid: &Grid,
    spec: &PotentialSpec,
    u0: &[f64],
    u1: &[f64],
) -> AdhesionVerdict {
    let state = BeamState::new(0.0, u0.to_vec(), u1.to_vec());
    let e = energy(params, grid, spec, &state);
    let sup = u0.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    let threshold = adhesion_threshold(spec, params.mu);
    AdhesionVerdict {
        sup_norm_u0: sup,
        initial_energy: e.total,
        threshold,
        hypothesis_met: e.total < threshold && sup < 1.0,
        conclusion_checked: None,
    }
}

/// True when every recorded state stays strictly inside the bonded zone.
pub fn verify_no_detachment(trajectory: &Trajectory) -> bool {
    trajectory
        .states
        .iter()
        .all(|s| s.max_abs_displacement() < 1.0)
}

/// L2 distance between two nodal profiles on the same grid.
pub fn state_distance(grid: &Grid, a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    l2_norm(&diff, grid.spacing())
}

/// Sup over recorded times of the L2 distance between two runs. The runs must
/// share a recording schedule.
pub fn sup_distance(grid: &Grid, a: &Trajectory, b: &Trajectory) -> f64 {
    assert_eq!(
        a.states.len(),
        b.states.len(),
        "trajectories record different schedules"
    );
    a.states
        .iter()
        .zip(&b.states)
        .map(|(sa, sb)| state_distance(grid, &sa.displacement, &sb.displacement))
        .fold(0.0, f64::max)
}

/// Sup over recorded times of the L2 distance to a spatially uniform signal.
pub fn sup_distance_to_uniform(
    grid: &Grid,
    trajectory: &Trajectory,
    reference: impl Fn(f64) -> f64,
) -> f64 {
    trajectory
        .states
        .iter()
        .map(|s| {
            let r = reference(s.time);
            let diff: Vec<f64> = s.displacement.iter().map(|u| u - r).collect();
            l2_norm(&diff, grid.spacing())
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Classification {
    /// At rest near zero displacement.
    Trivial,
    /// Settled onto an affine profile at or above the bonded zone.
    EscapedAbove,
    /// Settled onto an affine profile at or below the bonded zone.
    EscapedBelow,
    /// Still transient, or not affine within tolerance.
    Unclassified,
}

/// Affine fit `a + b x` to the time-averaged tail of a run.
#[derive(Debug, Clone, Serialize)]
pub struct AffineState {
    pub a: f64,
    pub b: f64,
    /// L2 misfit of the time-averaged profile against the affine fit.
    pub residual: f64,
    pub classification: Classification,
}

/// Time-averages the recorded tail (the last `window_fraction` of the time
/// span), fits an affine profile by least squares, and classifies the result.
pub fn long_time_probe(grid: &Grid, trajectory: &Trajectory, window_fraction: f64) -> AffineState {
    assert!(
        window_fraction > 0.0 && window_fraction <= 1.0,
        "window_fraction must lie in (0, 1]"
    );
    let states = &trajectory.states;
    let n = grid.n_points();
    let t_start = states[0].time;
    let t_end = states.last().unwrap().time;
    let cutoff = t_end - window_fraction * (t_end - t_start);
    let tail: Vec<&BeamState> = states.iter().filter(|s| s.time >= cutoff).collect();

    let m = tail.len() as f64;
    let mut u_mean = vec![0.0; n];
    let mut v_mean = vec![0.0; n];
    for s in &tail {
        for i in 0..n {
            u_mean[i] += s.displacement[i];
            v_mean[i] += s.velocity[i];
        }
    }
    for i in 0..n {
        u_mean[i] /= m;
        v_mean[i] /= m;
    }

    // Least-squares affine fit via the 2x2 normal equations.
    let np = n as f64;
    let (mut sx, mut sxx, mut su, mut sxu) = (0.0, 0.0, 0.0, 0.0);
    for (i, &u) in u_mean.iter().enumerate() {
        let x = grid.node(i);
        sx += x;
        sxx += x * x;
        su += u;
        sxu += x * u;
    }
    let det = np * sxx - sx * sx;
    let a = (su * sxx - sx * sxu) / det;
    let b = (np * sxu - sx * su) / det;

    let misfit: Vec<f64> = (0..n).map(|i| u_mean[i] - (a + b * grid.node(i))).collect();
    let residual = l2_norm(&misfit, grid.spacing());

    let amp0 = states[0].max_abs_displacement().max(
        states[0]
            .velocity
            .iter()
            .fold(0.0f64, |mx, &x| mx.max(x.abs())),
    );
    let tol_zero = 1e-3 * amp0.max(1.0);
    let tol_one = 1e-3;
    let res_tol = tol_zero * grid.length().sqrt();
    let sup_v = v_mean.iter().fold(0.0f64, |mx, &x| mx.max(x.abs()));
    let fit_lo = a.min(a + b * grid.length());
    let fit_hi = a.max(a + b * grid.length());

    let classification = if residual > res_tol {
        Classification::Unclassified
    } else if fit_lo.abs().max(fit_hi.abs()) <= tol_zero && sup_v <= tol_zero {
        Classification::Trivial
    } else if fit_lo >= 1.0 - tol_one {
        Classification::EscapedAbove
    } else if fit_hi <= -(1.0 - tol_one) {
        Classification::EscapedBelow
    } else {
        Classification::Unclassified
    };

    AffineState {
        a,
        b,
        residual,
        classification,
    }
}

/// Force-free beam evolved with the same stepper and recording schedule as
/// `simulate`, used as the linear reference flow.
fn free_beam_states(
    params: &BeamParams,
    grid: &Grid,
    initial: &BeamState,
    dt: f64,
    n_steps: u64,
    stride: u64,
) -> Vec<BeamState> {
    let n = grid.n_points();
    let h = grid.spacing();
    let scale = -params.mu / (h * h * h * h);
    let inv_rho = 1.0 / params.rho;
    let half_dt = 0.5 * dt;
    let t0 = initial.time;

    let mut u = initial.displacement.clone();
    let mut v = initial.velocity.clone();
    let mut w = vec![0.0; n];
    let mut a = vec![0.0; n];
    let mut states = Vec::with_capacity((n_steps / stride + 2) as usize);

    acceleration_with(|_| 0.0, scale, inv_rho, &u, &mut w, &mut a);
    for k in 0..n_steps {
        if k % stride == 0 {
            states.push(BeamState::new(t0 + k as f64 * dt, u.clone(), v.clone()));
        }
        for i in 0..n {
            v[i] += half_dt * a[i];
        }
        for i in 0..n {
            u[i] += dt * v[i];
        }
        acceleration_with(|_| 0.0, scale, inv_rho, &u, &mut w, &mut a);
        for i in 0..n {
            v[i] += half_dt * a[i];
        }
    }
    states.push(BeamState::new(t0 + n_steps as f64 * dt, u, v));
    states
}

/// One row of the linearization study.
#[derive(Debug, Clone, Serialize)]
pub struct LinearizationReport {
    /// Factor applied to the base initial data.
    pub scale: f64,
    /// Data failed the no-detachment hypothesis, so no run was made.
    pub skipped: bool,
    /// `sup_t (|d/dt (u - v)|_L2 + |curvature(u - v)|_L2)` against the
    /// force-free reference `v`.
    pub defect: Option<f64>,
    /// Max over recorded times of `E_w(t) / G(t)`, where `E_w` is the energy
    /// of the difference and `G(t) = e^t/(2 rho) int_0^t e^-s |h(u)|_L2^2 ds`
    /// is the a priori envelope. At most 1 up to discretization error.
    pub max_envelope_ratio: Option<f64>,
}

/// Runs the adhesive model at several amplitudes of the same base data and
/// measures, per amplitude, how far it departs from the force-free beam.
/// Amplitudes that violate the no-detachment hypothesis are reported as
/// skipped rather than run outside the regime the envelope covers.
#[allow(clippy::too_many_arguments)]
pub fn linearization_experiment(
    params: &BeamParams,
    grid: &Grid,
    spec: &PotentialSpec,
    base_u0: &[f64],
    base_u1: &[f64],
    scales: &[f64],
    horizon: f64,
    record_stride: usize,
) -> Result<Vec<LinearizationReport>, AnalysisError> {
    let dt = auto_dt(params, grid);
    let n_steps = ((horizon / dt).ceil() as u64).max(1);
    let h = grid.spacing();
    let mut reports = Vec::with_capacity(scales.len());

    for &scale in scales {
        let u0: Vec<f64> = base_u0.iter().map(|x| scale * x).collect();
        let u1: Vec<f64> = base_u1.iter().map(|x| scale * x).collect();
        let verdict = adhesion_check(params, grid, spec, &u0, &u1);
        if !verdict.hypothesis_met {
            reports.push(LinearizationReport {
                scale,
                skipped: true,
                defect: None,
                max_envelope_ratio: None,
            });
            continue;
        }

        let initial = BeamState::new(0.0, u0, u1);
        let setup = SimSetup {
            params: *params,
            grid: *grid,
            potential: *spec,
            initial: initial.clone(),
            horizon,
            dt,
            record_stride,
        };
        let outcome = simulate(&setup)?;
        let free = free_beam_states(params, grid, &initial, dt, n_steps, record_stride as u64);
        let nonlinear = &outcome.trajectory.states;
        assert_eq!(free.len(), nonlinear.len(), "recording schedules diverged");

        let mut defect = 0.0f64;
        let mut max_ratio = 0.0f64;
        let mut source_integral = 0.0;
        let mut prev_time = 0.0;
        let mut prev_integrand = 0.0;
        for (k, (su, sv)) in nonlinear.iter().zip(&free).enumerate() {
            let t = su.time;
            let dvel: Vec<f64> = su
                .velocity
                .iter()
                .zip(&sv.velocity)
                .map(|(x, y)| x - y)
                .collect();
            let cu = discrete_curvature(grid, &su.displacement);
            let cv = discrete_curvature(grid, &sv.displacement);
            let dcurv: Vec<f64> = cu.iter().zip(&cv).map(|(x, y)| x - y).collect();
            let nv = l2_norm(&dvel, h);
            let nc = l2_norm(&dcurv, h);
            defect = defect.max(nv + nc);

            let forces: Vec<f64> = su
                .displacement
                .iter()
                .map(|&x| {
                    let f = spec.select_h(x);
                    f * f
                })
                .collect();
            let p = trapezoid(&forces, h);
            let integrand = (-t).exp() * p;
            if k > 0 {
                source_integral += 0.5 * (t - prev_time) * (prev_integrand + integrand);
                let envelope = t.exp() / (2.0 * params.rho) * source_integral;
                let e_w = 0.5 * (params.rho * nv * nv + params.mu * nc * nc);
                if envelope > 0.0 {
                    max_ratio = max_ratio.max(e_w / envelope);
                } else if e_w > 0.0 {
                    max_ratio = f64::INFINITY;
                }
            }
            prev_time = t;
            prev_integrand = integrand;
        }

        reports.push(LinearizationReport {
            scale,
            skipped: false,
            defect: Some(defect),
            max_envelope_ratio: Some(max_ratio),
        });
    }
    Ok(reports)
}

/// Initial data for the smoothing study, parameterized by the shoulder width.
#[derive(Debug, Clone)]
pub enum InitialFamily {
    /// The same data for every eps.
    Fixed { u0: Vec<f64>, u1: Vec<f64> },
    /// Uniform `u = 1 - eps` at rest: bonded for every eps, approaching the
    /// detachment displacement from inside.
    BelowThreshold,
    /// Uniform `u = 1 + eps` with outward speed eps: detached for every eps,
    /// approaching the threshold from outside.
    AboveThreshold,
}

impl InitialFamily {
    fn data(&self, grid: &Grid, eps: f64) -> BeamState {
        let n = grid.n_points();
        match self {
            InitialFamily::Fixed { u0, u1 } => BeamState::new(0.0, u0.clone(), u1.clone()),
            InitialFamily::BelowThreshold => BeamState::new(0.0, vec![1.0 - eps; n], vec![0.0; n]),
            InitialFamily::AboveThreshold => BeamState::new(0.0, vec![1.0 + eps; n], vec![eps; n]),
        }
    }

    fn oracle(&self, eps: f64) -> Option<ClosedFormSolution> {
        match self {
            InitialFamily::Fixed { .. } => None,
            InitialFamily::BelowThreshold => Some(ClosedFormSolution::SmoothedOscillation { eps }),
            InitialFamily::AboveThreshold => Some(ClosedFormSolution::EscapingLinear { eps }),
        }
    }
}

/// One shoulder width's worth of the smoothing study.
#[derive(Debug, Clone, Serialize)]
pub struct RegularizationRow {
    pub eps: f64,
    /// Sup-in-time L2 distance between the smoothed run and the capped-law
    /// run from the same data.
    pub distance_to_exact: f64,
    /// Sup-in-time L2 distance to the closed-form solution, when the family
    /// has one.
    pub distance_to_oracle: Option<f64>,
    /// Final recorded displacement of the smoothed run.
    pub final_displacement: Vec<f64>,
}

/// For each shoulder width, runs the smoothed and capped laws from the same
/// data and measures their separation. `eps_list` must decrease strictly so
/// the rows read as a convergence history.
pub fn regularization_study(
    params: &BeamParams,
    grid: &Grid,
    family: &InitialFamily,
    eps_list: &[f64],
    horizon: f64,
    record_stride: usize,
) -> Result<Vec<RegularizationRow>, AnalysisError> {
    let ok = !eps_list.is_empty()
        && eps_list.iter().all(|&e| e > 0.0 && e < 2.0)
        && eps_list.windows(2).all(|w| w[1] < w[0]);
    if !ok {
        return Err(AnalysisError::BadEpsList(eps_list.to_vec()));
    }

    let dt = auto_dt(params, grid);
    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let initial = family.data(grid, eps);
        let smoothed = simulate(&SimSetup {
            params: *params,
            grid: *grid,
            potential: PotentialSpec::smoothed(eps)?,
            initial: initial.clone(),
            horizon,
            dt,
            record_stride,
        })?;
        let capped = simulate(&SimSetup {
            params: *params,
            grid: *grid,
            potential: PotentialSpec::exact_capped(),
            initial,
            horizon,
            dt,
            record_stride,
        })?;
        let distance_to_exact = sup_distance(grid, &smoothed.trajectory, &capped.trajectory);
        let distance_to_oracle = family
            .oracle(eps)
            .map(|sol| sup_distance_to_uniform(grid, &smoothed.trajectory, |t| sol.evaluate(t).0));
        rows.push(RegularizationRow {
            eps,
            distance_to_exact,
            distance_to_oracle,
            final_displacement: smoothed.trajectory.final_state().displacement.clone(),
        });
    }
    Ok(rows)
}
