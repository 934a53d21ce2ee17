//! Damped Newton solver for the step equations.
//!
//! The Jacobian is banded; it is assembled from `2·BANDWIDTH + 1` directional
//! derivatives of the residual, each seeding every `(2·BANDWIDTH + 1)`-th unknown.

use num_dual::Dual64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stepper::banded::BandMatrix;
use crate::stepper::residual::{StepContext, BANDWIDTH};

/// Convergence record of one nonlinear solve.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NewtonReport {
    pub iterations: usize,
    pub residual_norm: f64,
    pub damping_events: usize,
    /// `‖R‖∞` before each iteration and after the last one.
    pub history: Vec<f64>,
}

pub fn max_norm(r: &[f64]) -> f64 {
    r.iter().fold(0.0f64, |a, x| if x.is_nan() { f64::NAN } else { a.max(x.abs()) })
}

fn l2_norm(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Banded Jacobian of the step residual at `x`.
pub fn jacobian(ctx: &StepContext<'_>, x: &[f64]) -> BandMatrix {
    let n = x.len();
    let colors = 2 * BANDWIDTH + 1;
    let mut jac = BandMatrix::zeros(n, BANDWIDTH, BANDWIDTH);
    let mut xd: Vec<Dual64> = x.iter().map(|&v| Dual64::from(v)).collect();
    let mut out = vec![Dual64::from(0.0); n];
    for c in 0..colors.min(n) {
        for (j, xj) in xd.iter_mut().enumerate() {
            xj.eps = if j % colors == c { 1.0 } else { 0.0 };
        }
        ctx.assemble(&xd, &mut out, None);
        for (i, r) in out.iter().enumerate() {
            // the unique seeded column within the band of row i
            let lo = i.saturating_sub(BANDWIDTH);
            let j = lo + (c + colors - lo % colors) % colors;
            if j < n && j <= i + BANDWIDTH {
                jac.set(i, j, r.eps);
            }
        }
    }
    jac
}

/// `J(x)·p` from a single directional derivative.
pub fn jacobian_vector_product(ctx: &StepContext<'_>, x: &[f64], p: &[f64]) -> Vec<f64> {
    let xd: Vec<Dual64> = x.iter().zip(p).map(|(&v, &d)| Dual64::new(v, d)).collect();
    let mut out = vec![Dual64::from(0.0); x.len()];
    ctx.assemble(&xd, &mut out, None);
    out.iter().map(|r| r.eps).collect()
}

/// Solves `R(x) = 0` starting from `x`, with Armijo backtracking on `‖R‖₂`.
pub fn solve(ctx: &StepContext<'_>, mut x: Vec<f64>) -> (Result<Vec<f64>>, NewtonReport) {
    let cfg = ctx.cfg;
    let mut report = NewtonReport::default();
    let mut r = ctx.residual(&x);
    let mut norm = max_norm(&r);
    report.history.push(norm);
    loop {
        if !norm.is_finite() {
            report.residual_norm = norm;
            return (
                Err(Error::NewtonFailed {
                    iterations: report.iterations,
                    residual: norm,
                }),
                report,
            );
        }
        if norm <= cfg.newton_tol {
            report.residual_norm = norm;
            return (Ok(x), report);
        }
        if report.iterations >= cfg.newton_max_iter {
            report.residual_norm = norm;
            return (
                Err(Error::NewtonFailed {
                    iterations: report.iterations,
                    residual: norm,
                }),
                report,
            );
        }
        report.iterations += 1;
        let lu = match jacobian(ctx, &x).factorize() {
            Ok(lu) => lu,
            Err(e) => {
                report.residual_norm = norm;
                return (Err(e), report);
            }
        };
        let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        let dx = lu.solve(&rhs);
        let f0 = l2_norm(&r);
        let mut lambda = 1.0;
        loop {
            let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a + lambda * d).collect();
            let rt = ctx.residual(&trial);
            let ft = l2_norm(&rt);
            if ft.is_finite() && ft <= (1.0 - cfg.armijo_c * lambda) * f0 {
                x = trial;
                r = rt;
                break;
            }
            lambda *= 0.5;
            report.damping_events += 1;
            if lambda < cfg.min_damping {
                report.residual_norm = norm;
                return (
                    Err(Error::NewtonFailed {
                        iterations: report.iterations,
                        residual: norm,
                    }),
                    report,
                );
            }
        }
        norm = max_norm(&r);
        report.history.push(norm);
    }
}
