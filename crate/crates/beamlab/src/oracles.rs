//! Independent reference solutions.
//!
//! Everything here is deliberately decoupled from the grid operator and the
//! beam stepper: spatially uniform states kill the bending term, so the PDE
//! collapses to the scalar ODE `rho u'' = -h(u)`, which we integrate with an
//! adaptive Runge-Kutta method plus event location at the breaking threshold.
//! Together with a handful of closed-form solutions and the free-free
//! characteristic roots, these are the yardsticks the solver is tested
//! against, never the solver itself.

use crate::potential::PotentialSpec;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("oracle tolerance must be in (0, 1e-10], got {tol}")]
    ToleranceTooLoose { tol: f64 },
    #[error("sample times must be finite, nonnegative and nondecreasing")]
    BadSampleTimes,
    #[error("adaptive step size underflowed at t = {time}")]
    StepUnderflow { time: f64 },
}

/// Spatially uniform closed-form solutions used as replay targets.
///
/// Each variant records the constitutive law it solves, its initial data, and
/// its conserved energy per unit length; `evaluate` returns `(u, u_t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClosedFormSolution {
    /// `(1-eps) cos(sqrt(2-eps) t)` under the smoothed law: oscillation
    /// confined to the quadratic core.
    SmoothedOscillation { eps: f64 },
    /// Rest state `u = 1+eps` at the outer shoulder edge of the smoothed law,
    /// where the smoothed force vanishes.
    SmoothedEquilibrium { eps: f64 },
    /// `eps t + 1 + eps` under the capped law: a detached beam drifting away
    /// at constant speed.
    EscapingLinear { eps: f64 },
    /// `(1-eps) cos(sqrt(2) t)` under the capped law: bonded oscillation.
    CappedOscillation { eps: f64 },
    /// `sqrt(2) sin(sqrt(2) t)` until `u` reaches 1 at `t = pi/(4 sqrt(2))`,
    /// then linear escape; C^1 but not C^2 at the switch.
    DetachmentKink,
}

impl ClosedFormSolution {
    /// Time at which the acceleration jumps, where one exists.
    pub fn kink_time(&self) -> Option<f64> {
        match self {
            ClosedFormSolution::DetachmentKink => {
                Some(std::f64::consts::PI / (4.0 * std::f64::consts::SQRT_2))
            }
            _ => None,
        }
    }

    pub fn evaluate(&self, t: f64) -> (f64, f64) {
        match *self {
            ClosedFormSolution::SmoothedOscillation { eps } => {
                let omega = (2.0 - eps).sqrt();
                (
                    (1.0 - eps) * (omega * t).cos(),
                    -(1.0 - eps) * omega * (omega * t).sin(),
                )
            }
            ClosedFormSolution::SmoothedEquilibrium { eps } => (1.0 + eps, 0.0),
            ClosedFormSolution::EscapingLinear { eps } => (eps * t + 1.0 + eps, eps),
            ClosedFormSolution::CappedOscillation { eps } => {
                let omega = std::f64::consts::SQRT_2;
                (
                    (1.0 - eps) * (omega * t).cos(),
                    -(1.0 - eps) * omega * (omega * t).sin(),
                )
            }
            ClosedFormSolution::DetachmentKink => {
                let omega = std::f64::consts::SQRT_2;
                let t_star = self.kink_time().unwrap();
                if t <= t_star {
                    (omega * (omega * t).sin(), 2.0 * (omega * t).cos())
                } else {
                    (omega * t + 1.0 - std::f64::consts::FRAC_PI_4, omega)
                }
            }
        }
    }

    /// Analytic second derivative of the displacement, branch by branch.
    /// At a kink the left branch value is returned.
    pub fn second_derivative(&self, t: f64) -> f64 {
        match *self {
            ClosedFormSolution::SmoothedOscillation { eps } => -(2.0 - eps) * self.evaluate(t).0,
            ClosedFormSolution::SmoothedEquilibrium { .. } => 0.0,
            ClosedFormSolution::EscapingLinear { .. } => 0.0,
            ClosedFormSolution::CappedOscillation { .. } => -2.0 * self.evaluate(t).0,
            ClosedFormSolution::DetachmentKink => {
                if t <= self.kink_time().unwrap() {
                    -2.0 * self.evaluate(t).0
                } else {
                    0.0
                }
            }
        }
    }

    /// The constitutive law under which the formula solves the dynamics
    /// (detached selection at the threshold).
    pub fn law(&self) -> PotentialSpec {
        match *self {
            ClosedFormSolution::SmoothedOscillation { eps }
            | ClosedFormSolution::SmoothedEquilibrium { eps } => {
                PotentialSpec::smoothed(eps).expect("closed forms use eps in (0,2)")
            }
            ClosedFormSolution::EscapingLinear { .. }
            | ClosedFormSolution::CappedOscillation { .. }
            | ClosedFormSolution::DetachmentKink => PotentialSpec::exact_capped(),
        }
    }

    /// Initial data `(u(0), u_t(0))`.
    pub fn initial(&self) -> (f64, f64) {
        self.evaluate(0.0)
    }

    /// Conserved total energy on a beam of length `length` with `rho = mu = 1`.
    pub fn energy(&self, length: f64) -> f64 {
        let per_unit = match *self {
            ClosedFormSolution::SmoothedOscillation { eps } => {
                (2.0 - eps) * (1.0 - eps) * (1.0 - eps) / 2.0
            }
            ClosedFormSolution::SmoothedEquilibrium { eps } => (2.0 - eps) * (1.0 + eps) / 2.0,
            ClosedFormSolution::EscapingLinear { eps } => (eps * eps + 2.0) / 2.0,
            ClosedFormSolution::CappedOscillation { eps } => (1.0 - eps) * (1.0 - eps),
            ClosedFormSolution::DetachmentKink => 2.0,
        };
        per_unit * length
    }

    /// Stable snake_case name for reports and file names.
    pub fn label(&self) -> &'static str {
        match self {
            ClosedFormSolution::SmoothedOscillation { .. } => "smoothed_oscillation",
            ClosedFormSolution::SmoothedEquilibrium { .. } => "smoothed_equilibrium",
            ClosedFormSolution::EscapingLinear { .. } => "escaping_linear",
            ClosedFormSolution::CappedOscillation { .. } => "capped_oscillation",
            ClosedFormSolution::DetachmentKink => "detachment_kink",
        }
    }

    pub fn all_with(eps: f64) -> Vec<ClosedFormSolution> {
        vec![
            ClosedFormSolution::SmoothedOscillation { eps },
            ClosedFormSolution::SmoothedEquilibrium { eps },
            ClosedFormSolution::EscapingLinear { eps },
            ClosedFormSolution::CappedOscillation { eps },
            ClosedFormSolution::DetachmentKink,
        ]
    }
}

/// Dormand-Prince 5(4) step for `y' = f(y)` with `y = (u, v)`.
/// Returns (y5, error estimate).
fn rkdp_step(
    f: &impl Fn(f64, f64) -> (f64, f64),
    y: (f64, f64),
    dt: f64,
) -> ((f64, f64), (f64, f64)) {
    const A: [[f64; 6]; 6] = [
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [
            19372.0 / 6561.0,
            -25360.0 / 2187.0,
            64448.0 / 6561.0,
            -212.0 / 729.0,
            0.0,
            0.0,
        ],
        [
            9017.0 / 3168.0,
            -355.0 / 33.0,
            46732.0 / 5247.0,
            49.0 / 176.0,
            -5103.0 / 18656.0,
            0.0,
        ],
        [
            35.0 / 384.0,
            0.0,
            500.0 / 1113.0,
            125.0 / 192.0,
            -2187.0 / 6784.0,
            11.0 / 84.0,
        ],
    ];
    const B5: [f64; 7] = [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
        0.0,
    ];
    const B4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];
    let mut k = [(0.0f64, 0.0f64); 7];
    k[0] = f(y.0, y.1);
    for s in 1..7 {
        let mut u = y.0;
        let mut v = y.1;
        for (j, kj) in k.iter().enumerate().take(s) {
            let a = A[s - 1][j];
            u += dt * a * kj.0;
            v += dt * a * kj.1;
        }
        k[s] = f(u, v);
    }
    let mut y5 = y;
    let mut y4 = y;
    for (j, kj) in k.iter().enumerate() {
        y5.0 += dt * B5[j] * kj.0;
        y5.1 += dt * B5[j] * kj.1;
        y4.0 += dt * B4[j] * kj.0;
        y4.1 += dt * B4[j] * kj.1;
    }
    (y5, (y5.0 - y4.0, y5.1 - y4.1))
}

/// Integrates the uniform reduction `rho u'' = -h(u)` and samples `(u, u_t)`
/// at the requested times.
///
/// Adaptive Dormand-Prince with mixed tolerance `tol`; whenever `|u|` crosses
/// the breaking threshold within an accepted step, the crossing is located by
/// bisection in the step length to 1e-13 and the integration is restarted
/// from the located point, so no step straddles the force discontinuity.
pub fn uniform_ode_oracle(
    spec: &PotentialSpec,
    rho: f64,
    u0: f64,
    v0: f64,
    sample_times: &[f64],
    tol: f64,
) -> Result<Vec<(f64, f64)>, OracleError> {
    if !(tol > 0.0 && tol <= 1e-10) {
        return Err(OracleError::ToleranceTooLoose { tol });
    }
    if sample_times
        .windows(2)
        .any(|w| w[1] < w[0] || !w[0].is_finite() || !w[1].is_finite())
        || sample_times
            .first()
            .is_some_and(|&t| t < 0.0 || !t.is_finite())
    {
        return Err(OracleError::BadSampleTimes);
    }

    let f = move |u: f64, v: f64| (v, -spec.select_h(u) / rho);
    let threshold_gap = |u: f64| u.abs() - 1.0;

    let mut t = 0.0;
    let mut y = (u0, v0);
    let mut dt = 1e-3f64;
    let mut out = Vec::with_capacity(sample_times.len());

    for &t_target in sample_times {
        while t < t_target {
            let dt_try = dt.min(t_target - t);
            let (y_new, err) = rkdp_step(&f, y, dt_try);
            let scale_u = tol + tol * y.0.abs().max(y_new.0.abs());
            let scale_v = tol + tol * y.1.abs().max(y_new.1.abs());
            let err_norm = ((err.0 / scale_u).powi(2) + (err.1 / scale_v).powi(2)).sqrt()
                / std::f64::consts::SQRT_2;

            if err_norm <= 1.0 {
                // Event check: did |u| - 1 change sign across this step?
                let g0 = threshold_gap(y.0);
                let g1 = threshold_gap(y_new.0);
                if g0 != 0.0 && g0.signum() != g1.signum() {
                    // Bisect the step length to pin the crossing time.
                    let (mut lo, mut hi) = (0.0f64, dt_try);
                    for _ in 0..200 {
                        if hi - lo <= 1e-13 {
                            break;
                        }
                        let mid = 0.5 * (lo + hi);
                        let (y_mid, _) = rkdp_step(&f, y, mid);
                        if threshold_gap(y_mid.0).signum() == g0.signum() {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    let (y_cross, _) = rkdp_step(&f, y, hi);
                    t += hi;
                    y = y_cross;
                    dt = (dt * 0.5).max(1e-12);
                    continue;
                }
                t += dt_try;
                y = y_new;
                let grow = if err_norm == 0.0 {
                    5.0
                } else {
                    (0.9 * err_norm.powf(-0.2)).clamp(0.2, 5.0)
                };
                dt = (dt_try * grow).min(0.5);
            } else {
                dt = dt_try * (0.9 * err_norm.powf(-0.2)).clamp(0.1, 1.0);
                if dt < 1e-14 {
                    return Err(OracleError::StepUnderflow { time: t });
                }
            }
        }
        out.push(y);
    }
    Ok(out)
}

/// First `count` positive roots `x_k` of `cos(x) cosh(x) = 1`, by bisection on
/// the bounded equivalent form `cos(x) - sech(x)` (same roots, O(1) slope).
pub fn characteristic_roots(count: usize) -> Vec<f64> {
    let f = |x: f64| x.cos() - 1.0 / x.cosh();
    let mut roots = Vec::with_capacity(count);
    for k in 1..=count {
        let center = (2 * k + 1) as f64 * std::f64::consts::FRAC_PI_2;
        let (mut lo, mut hi) = (center - 0.5, center + 0.5);
        debug_assert!(f(lo) * f(hi) < 0.0, "bracket failure at k={k}");
        for _ in 0..200 {
            if hi - lo <= 1e-13 * center.max(1.0) {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if f(mid) == 0.0 {
                lo = mid;
                hi = mid;
                break;
            }
            if f(lo) * f(mid) < 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        roots.push(0.5 * (lo + hi));
    }
    roots
}

/// First `count` free-free flexural frequencies `omega_k = beta_k^2 sqrt(mu/rho)`
/// with `beta_k = x_k / L`.
pub fn free_free_frequencies(rho: f64, mu: f64, length: f64, count: usize) -> Vec<f64> {
    assert!(count <= 10, "root table validated for the first 10 modes");
    characteristic_roots(count)
        .into_iter()
        .map(|x| {
            let beta = x / length;
            beta * beta * (mu / rho).sqrt()
        })
        .collect()
}
