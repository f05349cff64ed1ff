//! Discrete biharmonic operator on a uniform grid with free edges.
//!
//! The beam occupies `[0, L]` with nodes `x_i = i h`, `h = L/(n-1)`. Free
//! edges impose zero moment (`u_xx = 0`) and zero shear (`u_xxx = 0`) at both
//! ends; second-order ghost elimination turns those into the closure rows
//! `(2, -4, 2)` and `(-2, 5, -4, 1)` of the five-point fourth difference.
//!
//! The implementation evaluates the stencil as a second difference of second
//! differences. That is algebraically identical to the ghost rows, and the
//! nested first differences cancel exactly in floating point, so uniform
//! states map to exactly zero and FP-exact affine sequences are annihilated
//! exactly rather than to truncation-times-`1/h^4` noise.

use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("beam parameter {name} must be positive, got {value}")]
    NonPositiveParameter { name: &'static str, value: f64 },
    #[error("grid needs at least 5 points for the free-edge closure, got {n_points}")]
    GridTooCoarse { n_points: usize },
}

/// Material and geometry constants: linear density, flexural rigidity, length.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BeamParams {
    pub rho: f64,
    pub mu: f64,
    pub length: f64,
}

impl BeamParams {
    pub fn new(rho: f64, mu: f64, length: f64) -> Result<Self, ModelError> {
        for (name, value) in [("rho", rho), ("mu", mu), ("length", length)] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(ModelError::NonPositiveParameter { name, value });
            }
        }
        Ok(BeamParams { rho, mu, length })
    }
}

/// Uniform spatial grid over the beam.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    n_points: usize,
    length: f64,
}

impl Grid {
    pub fn new(length: f64, n_points: usize) -> Result<Self, ModelError> {
        if n_points < 5 {
            return Err(ModelError::GridTooCoarse { n_points });
        }
        if !(length > 0.0) || !length.is_finite() {
            return Err(ModelError::NonPositiveParameter {
                name: "length",
                value: length,
            });
        }
        Ok(Grid { n_points, length })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn spacing(&self) -> f64 {
        self.length / (self.n_points - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        i as f64 * self.spacing()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.node(i)).collect()
    }
}

/// Displacement and velocity profiles at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamState {
    pub time: f64,
    pub displacement: Vec<f64>,
    pub velocity: Vec<f64>,
}

impl BeamState {
    pub fn new(time: f64, displacement: Vec<f64>, velocity: Vec<f64>) -> Self {
        assert_eq!(
            displacement.len(),
            velocity.len(),
            "displacement and velocity lengths differ"
        );
        BeamState {
            time,
            displacement,
            velocity,
        }
    }

    pub fn uniform(grid: &Grid, u0: f64, v0: f64) -> Self {
        BeamState::new(0.0, vec![u0; grid.n_points()], vec![v0; grid.n_points()])
    }

    pub fn is_finite(&self) -> bool {
        self.displacement.iter().all(|x| x.is_finite())
            && self.velocity.iter().all(|x| x.is_finite())
    }

    pub fn max_abs_displacement(&self) -> f64 {
        self.displacement
            .iter()
            .fold(0.0f64, |m, &x| m.max(x.abs()))
    }
}

/// Centered second differences `u_{i-1} - 2 u_i + u_{i+1}` (no `1/h^2`),
/// with the free-edge moment condition pinning both boundary entries to zero.
pub(crate) fn second_differences_into(u: &[f64], w: &mut [f64]) {
    let n = u.len();
    assert!(n >= 5 && w.len() == n);
    w[0] = 0.0;
    w[n - 1] = 0.0;
    for i in 1..n - 1 {
        w[i] = (u[i + 1] - u[i]) - (u[i] - u[i - 1]);
    }
}

/// Raw fourth difference (no `1/h^4`) of `w = second_differences(u)` under the
/// shear closure, which reflects the moment profile: `w_{-1} = w_1`, `w_n = w_{n-2}`.
pub(crate) fn fourth_difference_from_moments(w: &[f64], z: &mut [f64]) {
    let n = w.len();
    assert!(n >= 5 && z.len() == n);
    z[0] = 2.0 * w[1];
    for i in 1..n - 1 {
        z[i] = (w[i - 1] - w[i]) + (w[i + 1] - w[i]);
    }
    z[n - 1] = 2.0 * w[n - 2];
}

/// Discrete curvature `u_xx` (second difference divided by `h^2`); zero at the
/// free edges by the moment condition. This is the profile whose square enters
/// the bending energy, matching the operator closure.
pub fn discrete_curvature(grid: &Grid, u: &[f64]) -> Vec<f64> {
    assert_eq!(u.len(), grid.n_points(), "displacement length != grid");
    let mut w = vec![0.0; u.len()];
    second_differences_into(u, &mut w);
    let inv_h2 = 1.0 / (grid.spacing() * grid.spacing());
    for wi in w.iter_mut() {
        *wi *= inv_h2;
    }
    w
}

/// Applies the right-hand-side bending term: returns `-mu * D4 u` where `D4`
/// is the free-edge fourth difference divided by `h^4`.
pub fn apply_biharmonic(params: &BeamParams, grid: &Grid, displacement: &[f64]) -> Vec<f64> {
    assert_eq!(
        displacement.len(),
        grid.n_points(),
        "displacement length != grid"
    );
    let n = displacement.len();
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; n];
    second_differences_into(displacement, &mut w);
    fourth_difference_from_moments(&w, &mut z);
    let h = grid.spacing();
    let scale = -params.mu / (h * h * h * h);
    for zi in z.iter_mut() {
        *zi *= scale;
    }
    z
}

/// Dense matrix `M` with `M u = apply_biharmonic(u)`, assembled by applying
/// the operator to each basis vector. Test and spectrum path; the stepper
/// stays matrix-free.
pub fn operator_matrix(params: &BeamParams, grid: &Grid) -> DMatrix<f64> {
    let n = grid.n_points();
    let mut m = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        let col = apply_biharmonic(params, grid, &e);
        for i in 0..n {
            m[(i, j)] = col[i];
        }
        e[j] = 0.0;
    }
    m
}

/// Composite trapezoid weights `h * (1/2, 1, ..., 1, 1/2)`.
pub fn trapezoid_weights(grid: &Grid) -> Vec<f64> {
    let n = grid.n_points();
    let h = grid.spacing();
    let mut w = vec![h; n];
    w[0] = 0.5 * h;
    w[n - 1] = 0.5 * h;
    w
}

/// Composite trapezoid quadrature of nodal values.
pub fn trapezoid(values: &[f64], spacing: f64) -> f64 {
    let n = values.len();
    assert!(n >= 2);
    let mut sum = 0.5 * (values[0] + values[n - 1]);
    for &v in &values[1..n - 1] {
        sum += v;
    }
    sum * spacing
}

/// Discrete L2(0, L) norm under trapezoid quadrature.
pub fn l2_norm(values: &[f64], spacing: f64) -> f64 {
    let n = values.len();
    assert!(n >= 2);
    let mut sum = 0.5 * (values[0] * values[0] + values[n - 1] * values[n - 1]);
    for &v in &values[1..n - 1] {
        sum += v * v;
    }
    (sum * spacing).sqrt()
}

/// First `count` nonzero flexural frequencies of the discrete operator,
/// from the eigenvalues of `-M/rho` after similarity-symmetrization with the
/// trapezoid weights (under which the operator is self-adjoint).
pub fn flexural_frequencies(params: &BeamParams, grid: &Grid, count: usize) -> Vec<f64> {
    let n = grid.n_points();
    assert!(count + 2 <= n, "asked for more modes than the grid carries");
    let m = operator_matrix(params, grid);
    let w = trapezoid_weights(grid);
    let sqrt_w: Vec<f64> = w.iter().map(|x| x.sqrt()).collect();
    // C = W^{1/2} (-M) W^{-1/2} is symmetric and similar to -M.
    let mut c = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            c[(i, j)] = -m[(i, j)] * sqrt_w[i] / sqrt_w[j];
        }
    }
    // Clean residual asymmetry from the two scaling roundings.
    for i in 0..n {
        for j in (i + 1)..n {
            let s = 0.5 * (c[(i, j)] + c[(j, i)]);
            c[(i, j)] = s;
            c[(j, i)] = s;
        }
    }
    let eig = nalgebra::SymmetricEigen::new(c);
    let mut lambdas: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    lambdas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // Two-dimensional affine kernel sits at the bottom of the spectrum.
    lambdas[2..2 + count]
        .iter()
        .map(|&l| (l.max(0.0) / params.rho).sqrt())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn grid(n: usize) -> Grid {
        Grid::new(1.0, n).unwrap()
    }

    fn params() -> BeamParams {
        BeamParams::new(1.0, 1.0, 1.0).unwrap()
    }

    /// Ghost-point elimination of u_xx = u_xxx = 0 gives these closure rows;
    /// assembled here independently of the nested-difference production path.
    fn ghost_matrix(params: &BeamParams, grid: &Grid) -> DMatrix<f64> {
        let n = grid.n_points();
        let h = grid.spacing();
        let scale = -params.mu / (h * h * h * h);
        let mut m = DMatrix::zeros(n, n);
        let put = |m: &mut DMatrix<f64>, i: usize, entries: &[(usize, f64)]| {
            for &(j, c) in entries {
                m[(i, j)] = c * scale;
            }
        };
        put(&mut m, 0, &[(0, 2.0), (1, -4.0), (2, 2.0)]);
        put(&mut m, 1, &[(0, -2.0), (1, 5.0), (2, -4.0), (3, 1.0)]);
        for i in 2..n - 2 {
            put(
                &mut m,
                i,
                &[
                    (i - 2, 1.0),
                    (i - 1, -4.0),
                    (i, 6.0),
                    (i + 1, -4.0),
                    (i + 2, 1.0),
                ],
            );
        }
        put(
            &mut m,
            n - 2,
            &[(n - 4, 1.0), (n - 3, -4.0), (n - 2, 5.0), (n - 1, -2.0)],
        );
        put(&mut m, n - 1, &[(n - 3, 2.0), (n - 2, -4.0), (n - 1, 2.0)]);
        m
    }

    #[test]
    fn matches_independent_ghost_assembly() {
        for n in [5, 8, 31] {
            let g = grid(n);
            let p = BeamParams::new(2.0, 3.0, 1.0).unwrap();
            let built = operator_matrix(&p, &g);
            let reference = ghost_matrix(&p, &g);
            let scale = p.mu / g.spacing().powi(4);
            for i in 0..n {
                for j in 0..n {
                    assert!(
                        (built[(i, j)] - reference[(i, j)]).abs() <= 1e-11 * scale,
                        "entry ({i},{j}) differs at n={n}: {} vs {}",
                        built[(i, j)],
                        reference[(i, j)]
                    );
                }
            }
        }
    }

    #[test]
    fn interior_impulse_row_pattern() {
        // h = 1, mu = 1: the response to a deep-interior unit impulse is the
        // negated stencil row.
        let g = Grid::new(10.0, 11).unwrap();
        let p = BeamParams::new(1.0, 1.0, 10.0).unwrap();
        let mut u = vec![0.0; 11];
        u[5] = 1.0;
        let out = apply_biharmonic(&p, &g, &u);
        let expected = [-1.0, 4.0, -6.0, 4.0, -1.0];
        for (k, &e) in expected.iter().enumerate() {
            assert_relative_eq!(out[3 + k], e, max_relative = 1e-13);
        }
        assert_eq!(out[1], 0.0);
        assert_eq!(out[8], 0.0);
    }

    #[test]
    fn annihilates_fp_exact_affine_sequences_exactly() {
        // Dyadic step and offset make u exactly affine in floating point;
        // the nested second differences then cancel with no roundoff at all.
        for n in [5, 101, 401] {
            let g = grid(n);
            for (step, offset) in [(0.5, -0.25), (0.0, 3.0), (-0.03125, 1.5)] {
                let u: Vec<f64> = (0..n).map(|i| offset + step * i as f64).collect();
                let out = apply_biharmonic(&params(), &g, &u);
                assert!(
                    out.iter().all(|&z| z == 0.0),
                    "affine input not annihilated exactly at n={n}"
                );
            }
        }
    }

    #[test]
    fn float_affine_samples_annihilated_to_operator_roundoff() {
        // Arbitrary-real affine data sampled through fl(a x + b) carries O(eps)
        // deviations from exact affinity, which the operator amplifies by at
        // most ~16 mu / h^4.
        let n = 101;
        let g = grid(n);
        let (a, b) = (0.7310562, -0.2193);
        let u: Vec<f64> = (0..n).map(|i| a * g.node(i) + b).collect();
        let out = apply_biharmonic(&params(), &g, &u);
        let h = g.spacing();
        let bound = 16.0 * f64::EPSILON * (a.abs() + b.abs()) / (h * h * h * h);
        for &z in &out {
            assert!(
                z.abs() <= bound,
                "residual {z} above roundoff scale {bound}"
            );
        }
    }

    #[test]
    fn quadratic_interior_response_is_constant() {
        // u = x^2 has D4 u = 0 in the interior; only closure rows see the
        // nonzero boundary moment.
        let n = 41;
        let g = grid(n);
        let u: Vec<f64> = (0..n).map(|i| g.node(i) * g.node(i)).collect();
        let out = apply_biharmonic(&params(), &g, &u);
        let h = g.spacing();
        let tol = 32.0 * f64::EPSILON / (h * h * h * h);
        for (i, &z) in out.iter().enumerate().take(n - 2).skip(2) {
            assert!(
                z.abs() <= tol,
                "interior row {i} nonzero for quadratic: {z}"
            );
        }
        // Closure rows: w_1 = 2 h^2 exactly, so z_0 = 2 w_1 = 4 h^2, scaled by
        // -mu/h^4.
        assert_relative_eq!(out[0], -4.0 / (h * h), max_relative = 1e-10);
    }

    #[test]
    fn bilinear_form_symmetric_under_trapezoid_weights() {
        let n = 37;
        let g = grid(n);
        let p = BeamParams::new(0.7, 2.3, 1.0).unwrap();
        let w = trapezoid_weights(&g);
        let mut rng_state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            rng_state ^= rng_state << 13;
            rng_state ^= rng_state >> 7;
            rng_state ^= rng_state << 17;
            (rng_state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for _ in 0..20 {
            let v: Vec<f64> = (0..n).map(|_| next()).collect();
            let u: Vec<f64> = (0..n).map(|_| next()).collect();
            let mv = apply_biharmonic(&p, &g, &v);
            let mu_ = apply_biharmonic(&p, &g, &u);
            let pair_vu: f64 = (0..n).map(|i| w[i] * v[i] * mu_[i]).sum();
            let pair_uv: f64 = (0..n).map(|i| w[i] * u[i] * mv[i]).sum();
            let scale = pair_vu.abs().max(pair_uv.abs()).max(1e-30);
            assert!(
                ((pair_vu - pair_uv) / scale).abs() < 1e-12,
                "pairing asymmetry: {pair_vu} vs {pair_uv}"
            );
        }
    }

    #[test]
    fn operator_is_negative_semidefinite_in_weighted_pairing() {
        let n = 31;
        let g = grid(n);
        let p = params();
        let w = trapezoid_weights(&g);
        for k in 0..30 {
            let v: Vec<f64> = (0..n)
                .map(|i| ((i as f64 + 1.3) * (0.61 * k as f64 + 0.37)).sin())
                .collect();
            let mv = apply_biharmonic(&p, &g, &v);
            let quad: f64 = (0..n).map(|i| w[i] * v[i] * mv[i]).sum();
            assert!(
                quad <= 1e-10,
                "weighted quadratic form of M positive: {quad}"
            );
        }
    }

    #[test]
    fn grid_and_params_validate() {
        assert_eq!(
            Grid::new(1.0, 4),
            Err(ModelError::GridTooCoarse { n_points: 4 })
        );
        assert!(Grid::new(0.0, 11).is_err());
        assert!(BeamParams::new(0.0, 1.0, 1.0).is_err());
        assert!(BeamParams::new(1.0, -2.0, 1.0).is_err());
        assert!(BeamParams::new(1.0, 1.0, f64::NAN).is_err());
    }

    #[test]
    fn trapezoid_of_constant_is_length() {
        let g = grid(401);
        let vals = vec![3.0; 401];
        assert_relative_eq!(trapezoid(&vals, g.spacing()), 3.0, max_relative = 1e-12);
        assert_relative_eq!(l2_norm(&vals, g.spacing()), 3.0, max_relative = 1e-12);
    }

    proptest! {
        #[test]
        fn kernel_annihilation_for_dyadic_affine(
            num in -64i32..64,
            den_pow in 0u32..8,
            off_num in -64i32..64,
            n in 5usize..80,
        ) {
            let step = num as f64 / (1u64 << den_pow) as f64;
            let offset = off_num as f64 / 8.0;
            let g = grid(n);
            let u: Vec<f64> = (0..n).map(|i| offset + step * i as f64).collect();
            let out = apply_biharmonic(&params(), &g, &u);
            prop_assert!(out.iter().all(|&z| z == 0.0));
        }
    }
}
