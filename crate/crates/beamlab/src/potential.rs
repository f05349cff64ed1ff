//! Adhesive force laws.
//!
//! The foundation resists displacement through a capped quadratic potential:
//! `phi(u) = u^2` while the bond is intact (`|u| <= 1`) and `phi(u) = 1` once
//! it has broken (`|u| > 1`). Its derivative jumps at the breaking threshold,
//! so the force entering the equation of motion is a selection from the
//! subdifferential there. A four-branch C^1 family `phi_eps` interpolates the
//! jump across a shoulder of width `eps` and recovers the capped law as
//! `eps -> 0`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PotentialError {
    #[error("derivative of the capped potential is undefined at u = {u}; use select_h for a subdifferential selection")]
    DerivativeUndefined { u: f64 },
    #[error("shoulder width eps = {eps} outside (0, 2)")]
    InvalidShoulder { eps: f64 },
    #[error("selection_at_one = {value} outside [0, {max}]")]
    InvalidSelection { value: f64, max: f64 },
}

/// Which branch structure the potential uses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PotentialKind {
    /// `phi(u) = u^2` for `|u| <= 1`, `phi(u) = 1` beyond; derivative jumps at `|u| = 1`.
    ExactCapped,
    /// C^1 smoothing with transition shoulders on `[1, 1+eps]` and `[-1-eps, -1]`.
    Smoothed { eps: f64 },
}

/// An adhesion law together with the force selection used at the threshold.
///
/// `kappa` is the coercivity constant of the quadratic core (`phi(u) >= kappa u^2`
/// on `|u| <= 1`): 1 for the capped law, `(2 - eps)/2` for the smoothed family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub kind: PotentialKind,
    pub kappa: f64,
    /// Force value assigned at `u = 1` (negated at `u = -1`), inside
    /// `[0, phi'(1-)]`. Zero treats a grid value sitting exactly on the
    /// threshold as already detached.
    pub selection_at_one: f64,
}

impl PotentialSpec {
    /// Capped quadratic with the detached selection at the threshold.
    pub fn exact_capped() -> Self {
        PotentialSpec {
            kind: PotentialKind::ExactCapped,
            kappa: 1.0,
            selection_at_one: 0.0,
        }
    }

    /// C^1 member of the smoothing family with shoulder width `eps`.
    pub fn smoothed(eps: f64) -> Result<Self, PotentialError> {
        if !(eps > 0.0 && eps < 2.0) {
            return Err(PotentialError::InvalidShoulder { eps });
        }
        Ok(PotentialSpec {
            kind: PotentialKind::Smoothed { eps },
            kappa: (2.0 - eps) / 2.0,
            selection_at_one: 0.0,
        })
    }

    /// Replaces the threshold selection. Must lie in `[0, phi'(1-)]`.
    pub fn with_selection_at_one(mut self, value: f64) -> Result<Self, PotentialError> {
        let max = self.phi_prime_inner_limit();
        if !(0.0..=max).contains(&value) {
            return Err(PotentialError::InvalidSelection { value, max });
        }
        self.selection_at_one = value;
        Ok(self)
    }

    /// One-sided derivative `phi'(1-)`, the upper end of the admissible selections.
    pub fn phi_prime_inner_limit(&self) -> f64 {
        match self.kind {
            PotentialKind::ExactCapped => 2.0,
            PotentialKind::Smoothed { eps } => 2.0 - eps,
        }
    }

    /// Potential value. Total on all of R for both kinds.
    pub fn eval_phi(&self, u: f64) -> f64 {
        match self.kind {
            PotentialKind::ExactCapped => {
                if u.abs() <= 1.0 {
                    u * u
                } else {
                    1.0
                }
            }
            PotentialKind::Smoothed { eps } => {
                let a = u.abs();
                if a <= 1.0 {
                    (2.0 - eps) / 2.0 * u * u
                } else if a <= 1.0 + eps {
                    // Shoulder branch, written for u > 0; even in u.
                    (2.0 - eps) / eps * ((1.0 + eps) * (a - 0.5) - a * a / 2.0)
                } else {
                    (2.0 - eps) * (1.0 + eps) / 2.0
                }
            }
        }
    }

    /// Classical derivative. Errors exactly at the capped law's jump points.
    pub fn eval_phi_prime(&self, u: f64) -> Result<f64, PotentialError> {
        match self.kind {
            PotentialKind::ExactCapped => {
                if u.abs() < 1.0 {
                    Ok(2.0 * u)
                } else if u.abs() > 1.0 {
                    Ok(0.0)
                } else {
                    Err(PotentialError::DerivativeUndefined { u })
                }
            }
            PotentialKind::Smoothed { .. } => Ok(self.smoothed_prime(u)),
        }
    }

    fn smoothed_prime(&self, u: f64) -> f64 {
        let eps = match self.kind {
            PotentialKind::Smoothed { eps } => eps,
            PotentialKind::ExactCapped => unreachable!("smoothed_prime on capped law"),
        };
        smoothed_force(u, eps)
    }

    /// Subdifferential selection: the force actually applied by integrators.
    ///
    /// Agrees with `eval_phi_prime` wherever that derivative exists; at the
    /// capped law's jump it returns `selection_at_one` (negated at `u = -1`).
    /// For the smoothed family the derivative is continuous and the selection
    /// is just `phi_eps'`.
    pub fn select_h(&self, u: f64) -> f64 {
        match self.kind {
            PotentialKind::ExactCapped => capped_force(u, self.selection_at_one),
            PotentialKind::Smoothed { eps } => smoothed_force(u, eps),
        }
    }
}

/// Capped-law selection with the dispatch on the potential kind hoisted out
/// and written select-style, so time stepping vectorizes its inner loop.
#[inline(always)]
pub(crate) fn capped_force(u: f64, selection_at_one: f64) -> f64 {
    let a = u.abs();
    let core = if a < 1.0 { 2.0 * u } else { 0.0 };
    if a == 1.0 {
        selection_at_one.copysign(u)
    } else {
        core
    }
}

/// Smoothed-family force `phi_eps'(u)`, kind dispatch hoisted out.
///
/// The magnitude is the hat `min((2-eps) a, (2-eps)/eps (1+eps-a))` clamped at
/// zero, which equals the piecewise definition branch by branch and keeps the
/// evaluation branch-free.
#[inline(always)]
pub(crate) fn smoothed_force(u: f64, eps: f64) -> f64 {
    let a = u.abs();
    let core = (2.0 - eps) * a;
    let shoulder = (2.0 - eps) / eps * (1.0 + eps - a);
    core.min(shoulder).max(0.0).copysign(u)
}

/// Sup distance between the smoothed family member and the capped law,
/// measured on a dense sample plus the branch breakpoints.
///
/// Analytically the sup is `eps/2`, attained at the threshold.
pub fn smoothing_residual(eps: f64) -> Result<f64, PotentialError> {
    let smoothed = PotentialSpec::smoothed(eps)?;
    let exact = PotentialSpec::exact_capped();
    let half_width = 2.0f64.max(1.5 + eps);
    let step = 1e-4;
    let samples = (2.0 * half_width / step).ceil() as usize;
    let mut sup = 0.0f64;
    let mut probe = |u: f64| {
        let d = (smoothed.eval_phi(u) - exact.eval_phi(u)).abs();
        if d > sup {
            sup = d;
        }
    };
    for k in 0..=samples {
        probe(-half_width + k as f64 * step);
    }
    for bp in [-1.0 - eps, -1.0, 1.0, 1.0 + eps] {
        probe(bp);
    }
    Ok(sup)
}
