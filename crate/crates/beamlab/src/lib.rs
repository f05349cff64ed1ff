//! Dynamics of an elastic beam resting on a breakable adhesive foundation.
//!
//! The displacement `u(t, x)` of a beam with free edges on `[0, L]` obeys
//!
//! ```text
//! rho u_tt = -mu u_xxxx - h(u),      u_xx = u_xxx = 0 at x = 0, L,
//! ```
//!
//! where `h` selects a derivative of an adhesion potential `Phi` that grows
//! quadratically while `|u| < 1` and saturates once the beam pulls past the
//! bonding range. The capped law is exact but nonsmooth at `|u| = 1`; a
//! one-parameter smoothed family interpolates it with a `C^1` shoulder of
//! width `eps` and converges back to it as `eps -> 0`.
//!
//! The crate provides, in dependency order:
//!
//! - [`potential`]: the capped and smoothed force laws and their selections;
//! - [`operator`]: grid, trapezoid pairing, and the free-edge biharmonic
//!   closure, built so uniform and affine states are annihilated exactly;
//! - [`oracles`]: closed-form solutions and an independent adaptive ODE
//!   integrator used as yardsticks for the PDE stepper;
//! - [`dynamics`]: velocity-Verlet stepping with energy audits;
//! - [`analysis`]: detachment thresholds, long-time classification,
//!   linearization defects, and smoothing-convergence studies;
//! - [`config`] and [`io`]: JSON run descriptions and run artifacts;
//! - [`experiments`]: the batch harnesses behind the CLI.

// Validation guards are written `!(x > 0.0)` on purpose: unlike `x <= 0.0`,
// the negated form also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod config;
pub mod dynamics;
pub mod experiments;
pub mod io;
pub mod operator;
pub mod oracles;
pub mod potential;

pub use dynamics::{auto_dt, energy, simulate, stability_limit, SimOutcome, SimSetup};
pub use operator::{BeamParams, BeamState, Grid};
pub use potential::{PotentialKind, PotentialSpec};
