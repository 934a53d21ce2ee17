//! Two-point finite-volume discretization of `-λ² v0'' = u0` with Robin data
//! `λ² v0'·ν + β v0 = f` at both ends.
//!
//! The boundary value of `v0` is an auxiliary unknown linked to the boundary
//! cell by a half-cell gradient; it is eliminated in closed form, so the
//! assembled system stays tridiagonal in the cell values.

use serde::{Deserialize, Serialize};

use crate::discretization::mesh::Mesh;
use crate::error::{Error, Result};
use crate::physics::{ModelSpec, Scalar};

/// Cell values and boundary values of the electrostatic potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonSolution {
    pub cells: Vec<f64>,
    pub traces: [f64; 2],
}

/// Conductance `λ²/(h/2)` of a half cell.
#[inline]
pub fn half_cell_conductance(spec: &ModelSpec, mesh: &Mesh) -> f64 {
    2.0 * spec.lambda2 / mesh.h
}

/// Boundary value `(f + c v_cell)/(c + β)` of `v0` at interface `gamma` (0 or 1).
#[inline]
pub fn boundary_trace<D: Scalar>(v0_cell: D, gamma: usize, spec: &ModelSpec, mesh: &Mesh) -> D {
    let c = half_cell_conductance(spec, mesh);
    (v0_cell * c + spec.f[gamma]) / (c + spec.beta[gamma])
}

/// Both boundary values for a vector of cell values.
pub fn traces_of(v0: &[f64], spec: &ModelSpec, mesh: &Mesh) -> [f64; 2] {
    [
        boundary_trace(v0[0], 0, spec, mesh),
        boundary_trace(v0[v0.len() - 1], 1, spec, mesh),
    ]
}

/// Outward boundary flux `c (β v_cell - f)/(c + β)` after eliminating the trace.
#[inline]
fn boundary_outflow<D: Scalar>(v0_cell: D, gamma: usize, spec: &ModelSpec, mesh: &Mesh) -> D {
    let c = half_cell_conductance(spec, mesh);
    (v0_cell * spec.beta[gamma] - spec.f[gamma]) * (c / (c + spec.beta[gamma]))
}

/// Residual of the discrete Poisson equation in cell `k`:
/// outgoing displacement flux minus `h u0_k`.
#[inline]
pub fn poisson_row<D: Scalar>(k: usize, v0: &[D], u0_k: D, spec: &ModelSpec, mesh: &Mesh) -> D {
    let n = v0.len();
    let g = spec.lambda2 / mesh.h;
    let mut r = -(u0_k * mesh.h);
    if k == 0 {
        r += boundary_outflow(v0[0], 0, spec, mesh);
    } else {
        r += (v0[k] - v0[k - 1]) * g;
    }
    if k == n - 1 {
        r += boundary_outflow(v0[n - 1], 1, spec, mesh);
    } else {
        r += (v0[k] - v0[k + 1]) * g;
    }
    r
}

/// Derivative of [`poisson_row`] with respect to the diagonal cell value.
pub(crate) fn poisson_diagonal(k: usize, spec: &ModelSpec, mesh: &Mesh) -> f64 {
    let n = mesh.n_cells;
    let g = spec.lambda2 / mesh.h;
    let c = half_cell_conductance(spec, mesh);
    let mut d = 0.0;
    d += if k == 0 { c * spec.beta[0] / (c + spec.beta[0]) } else { g };
    d += if k == n - 1 { c * spec.beta[1] / (c + spec.beta[1]) } else { g };
    d
}

/// Solves the Robin Poisson problem for the given net charge.
pub fn solve_poisson(u0: &[f64], spec: &ModelSpec, mesh: &Mesh) -> Result<PoissonSolution> {
    mesh.check_len(u0.len())?;
    let n = mesh.n_cells;
    let g = spec.lambda2 / mesh.h;
    let c = half_cell_conductance(spec, mesh);
    let diag: Vec<f64> = (0..n).map(|k| poisson_diagonal(k, spec, mesh)).collect();
    let mut rhs: Vec<f64> = u0.iter().map(|q| q * mesh.h).collect();
    rhs[0] += spec.f[0] * c / (c + spec.beta[0]);
    rhs[n - 1] += spec.f[1] * c / (c + spec.beta[1]);
    let off = vec![-g; n - 1];
    let cells = solve_tridiagonal(&off, &diag, &off, &rhs)?;
    let traces = traces_of(&cells, spec, mesh);
    Ok(PoissonSolution { cells, traces })
}

/// Thomas algorithm for `lower[i-1] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]`.
pub(crate) fn solve_tridiagonal(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    rhs: &[f64],
) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut denom = diag[0];
    if denom == 0.0 || !denom.is_finite() {
        return Err(Error::Singular("zero pivot in tridiagonal solve".into()));
    }
    if n > 1 {
        c[0] = upper[0] / denom;
    }
    d[0] = rhs[0] / denom;
    for i in 1..n {
        denom = diag[i] - lower[i - 1] * c[i - 1];
        if denom == 0.0 || !denom.is_finite() {
            return Err(Error::Singular(format!("zero pivot in tridiagonal solve at row {i}")));
        }
        if i < n - 1 {
            c[i] = upper[i] / denom;
        }
        d[i] = (rhs[i] - lower[i - 1] * d[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Ok(d)
}

/// Discrete `H¹` norm `sqrt(½ Σ |Δv0|²/h + ½ Σ_Γ v0(Γ)²)`, half edges included.
pub fn h1_norm(v0: &[f64], traces: [f64; 2], mesh: &Mesh) -> f64 {
    let n = v0.len();
    let mut grad = 0.0;
    for k in 0..n - 1 {
        grad += (v0[k + 1] - v0[k]).powi(2) / mesh.h;
    }
    let half = mesh.h / 2.0;
    grad += (v0[0] - traces[0]).powi(2) / half + (v0[n - 1] - traces[1]).powi(2) / half;
    (0.5 * grad + 0.5 * (traces[0].powi(2) + traces[1].powi(2))).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::{ModelParams, RawKinetics};
    use std::f64::consts::PI;

    fn spec_with(beta: [f64; 2], f: [f64; 2], lambda2: f64) -> ModelSpec {
        let mut s = ModelSpec::new(&ModelParams::default(), &RawKinetics::uniform(1.0)).unwrap();
        s.lambda2 = lambda2;
        s.beta = beta;
        s.f = f;
        s
    }

    #[test]
    fn constant_data_gives_constant_potential() {
        let s = spec_with([1.0, 1.0], [0.7, 0.7], 0.01);
        let m = Mesh::new(10).unwrap();
        let sol = solve_poisson(&[0.0; 10], &s, &m).unwrap();
        for v in sol.cells.iter().chain(sol.traces.iter()) {
            assert!((v - 0.7).abs() < 1e-13);
        }
    }

    #[test]
    fn affine_solution_is_reproduced() {
        let (l2, b0, b1, f0, f1) = (0.3, 0.5, 2.0, -0.4, 1.1);
        let s = spec_with([b0, b1], [f0, f1], l2);
        // v = a + b x:  at 0: -λ² b + β0 a = f0;  at 1: λ² b + β1 (a + b) = f1
        let det = b0 * (l2 + b1) + l2 * b1;
        let a = (f0 * (l2 + b1) + l2 * f1) / det;
        let b = (b0 * f1 - b1 * f0) / det;
        let m = Mesh::new(13).unwrap();
        let sol = solve_poisson(&[0.0; 13], &s, &m).unwrap();
        for (k, v) in sol.cells.iter().enumerate() {
            assert!((v - (a + b * m.center(k))).abs() < 1e-10);
        }
        assert!((sol.traces[0] - a).abs() < 1e-10);
        assert!((sol.traces[1] - (a + b)).abs() < 1e-10);
    }

    fn manufactured_error(n: usize) -> f64 {
        let l2 = 0.05;
        let beta = [0.4, 1.5];
        let exact = |x: f64| (PI * x).cos() + x;
        let f = [-l2 + beta[0] * exact(0.0), l2 + beta[1] * exact(1.0)];
        let s = spec_with(beta, f, l2);
        let m = Mesh::new(n).unwrap();
        let u0 = m.sample(|x| l2 * PI * PI * (PI * x).cos());
        let sol = solve_poisson(&u0, &s, &m).unwrap();
        sol.cells
            .iter()
            .enumerate()
            .map(|(k, v)| (v - exact(m.center(k))).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn manufactured_solution_converges_at_second_order() {
        let errs: Vec<f64> = [16, 32, 64, 128].iter().map(|&n| manufactured_error(n)).collect();
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order > 1.9 && order < 2.1, "order {order}, errors {errs:?}");
        }
    }

    #[test]
    fn residual_vanishes_at_the_solution() {
        let s = spec_with([0.1, 0.2], [0.05, -0.3], 0.01);
        let m = Mesh::new(9).unwrap();
        let u0 = m.sample(|x| (3.0 * x).sin());
        let sol = solve_poisson(&u0, &s, &m).unwrap();
        for k in 0..9 {
            assert!(poisson_row(k, &sol.cells, u0[k], &s, &m).abs() < 1e-14);
        }
    }

    #[test]
    fn tridiagonal_matches_hand_solution() {
        let x = solve_tridiagonal(&[1.0], &[2.0, 3.0], &[1.0], &[3.0, 4.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
        assert!(solve_tridiagonal(&[], &[0.0], &[], &[1.0]).is_err());
    }

    #[test]
    fn h1_norm_of_constant() {
        let m = Mesh::new(4).unwrap();
        let n = h1_norm(&[2.0; 4], [2.0, 2.0], &m);
        assert!((n - 2.0).abs() < 1e-15);
    }
}
