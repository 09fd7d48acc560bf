//! Jacobi preconditioned conjugate gradients, the fallback when the
//! direct factorization of a positive definite matrix is unavailable.

use super::SparseSymMatrix;
use crate::error::Error;
use crate::Result;

/// Solves A x = b for symmetric positive definite A, starting from
/// zero, until ‖r‖₂ ≤ tol ‖b‖₂. Returns the solution and the number of
/// iterations used.
pub fn cg_solve(
    a: &SparseSymMatrix,
    b: &[f64],
    tol: f64,
    max_iters: usize,
) -> Result<(Vec<f64>, usize)> {
    let n = a.n();
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: b.len(),
        });
    }
    let norm_b = norm(b);
    if norm_b == 0.0 {
        return Ok((vec![0.0; n], 0));
    }
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();

    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(&ri, &di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];

    for iter in 1..=max_iters {
        a.mul_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::SolverStalled {
                iterations: iter,
                residual: norm(&r) / norm_b,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if norm(&r) <= tol * norm_b {
            return Ok((x, iter));
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::SolverStalled {
        iterations: max_iters,
        residual: norm(&r) / norm_b,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}
