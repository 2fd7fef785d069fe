//! Preconditioned conjugate gradients for matrix-free symmetric operators.

use crate::error::{Error, Result};
use crate::sum::pairwise_sum_by;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Relative residual target.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-9, max_iter: 500 }
    }
}

#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final value of the stopping norm applied to the residual.
    pub residual: f64,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    pairwise_sum_by(a.len(), |i| a[i] * b[i])
}

/// Solves `A x = b` for symmetric positive (semi-)definite `A`.
///
/// `project` is applied to every residual and preconditioned residual, which
/// keeps the iteration inside a subspace complementary to the kernel.
/// Iteration stops once `norm(r) ≤ target`.
pub fn pcg<A, P, Q, N>(
    apply: A,
    precondition: P,
    project: Q,
    norm: N,
    b: &[f64],
    target: f64,
    max_iter: usize,
) -> Result<CgOutcome>
where
    A: Fn(&[f64]) -> Vec<f64>,
    P: Fn(&[f64]) -> Vec<f64>,
    Q: Fn(&mut [f64]),
    N: Fn(&[f64]) -> f64,
{
    let len = b.len();
    let mut x = vec![0.0; len];
    let mut r = b.to_vec();
    project(&mut r);
    let mut res = norm(&r);
    if res <= target {
        return Ok(CgOutcome { x, iterations: 0, residual: res });
    }
    let mut z = precondition(&r);
    project(&mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for it in 1..=max_iter {
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::IndefiniteForm { curvature: pap });
        }
        let alpha = rz / pap;
        for i in 0..len {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        project(&mut r);
        res = norm(&r);
        if res <= target {
            return Ok(CgOutcome { x, iterations: it, residual: res });
        }
        z = precondition(&r);
        project(&mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..len {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NoConvergence { iterations: max_iter, residual: res })
}
