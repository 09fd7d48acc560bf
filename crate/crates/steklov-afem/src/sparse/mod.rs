//! Symmetric sparse matrices and the direct solver built on them.
//!
//! Matrices are stored in compressed sparse row form with both
//! triangles present, which keeps matrix-vector products simple and
//! lets the factorization extract whichever triangle it needs. The
//! direct solver is an LDLᵀ factorization over an approximate minimum
//! degree ordering; it accepts the mildly indefinite matrices K - σM
//! that shifted iterations produce. A Jacobi preconditioned conjugate
//! gradient solver backs it up for positive definite systems.

mod amd;
mod cg;
mod ldlt;

pub use amd::amd_order;
pub use cg::cg_solve;
pub use ldlt::{symbolic_fill, LdltFactor};

use crate::config::{SHIFT_PERTURBATION, SHIFT_RETRIES};
use crate::error::Error;
use crate::Result;

/// A symmetric matrix in compressed sparse row storage with sorted,
/// duplicate-free column indices per row and both triangles stored.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseSymMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    values: Vec<f64>,
}

impl SparseSymMatrix {
    /// Builds a matrix from (row, col, value) triplets, summing
    /// duplicates. The caller provides both triangles.
    pub fn from_triplets(n: usize, triplets: &[(u32, u32, f64)]) -> Result<Self> {
        for &(i, j, _) in triplets {
            if i as usize >= n || j as usize >= n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: i.max(j) as usize + 1,
                });
            }
        }
        let mut keyed: Vec<(u64, f64)> = triplets
            .iter()
            .map(|&(i, j, v)| ((i as u64) * n as u64 + j as u64, v))
            .collect();
        keyed.sort_unstable_by_key(|&(k, _)| k);

        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let mut iter = keyed.into_iter().peekable();
        while let Some((key, mut v)) = iter.next() {
            while let Some(&(next_key, next_v)) = iter.peek() {
                if next_key != key {
                    break;
                }
                v += next_v;
                iter.next();
            }
            let (i, j) = ((key / n as u64) as usize, (key % n as u64) as u32);
            row_ptr[i + 1] += 1;
            col_idx.push(j);
            values.push(v);
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(SparseSymMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[u32] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Entries of row `i` as (column, value) pairs.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (u32, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()]
            .iter()
            .zip(&self.values[range])
            .map(|(&j, &v)| (j, v))
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                if j as usize == i {
                    d[i] = v;
                }
            }
        }
        d
    }

    /// y = A x.
    pub fn mul_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        for i in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k] as usize];
            }
            y[i] = acc;
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_into(x, &mut y);
        y
    }

    /// C = self + alpha B, with the union sparsity pattern.
    pub fn add_scaled(&self, other: &SparseSymMatrix, alpha: f64) -> Result<SparseSymMatrix> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: other.n,
            });
        }
        let mut row_ptr = vec![0usize; self.n + 1];
        let mut col_idx = Vec::with_capacity(self.nnz());
        let mut values = Vec::with_capacity(self.nnz());
        for i in 0..self.n {
            let (mut p, pe) = (self.row_ptr[i], self.row_ptr[i + 1]);
            let (mut q, qe) = (other.row_ptr[i], other.row_ptr[i + 1]);
            while p < pe || q < qe {
                let cp = if p < pe { self.col_idx[p] } else { u32::MAX };
                let cq = if q < qe { other.col_idx[q] } else { u32::MAX };
                if cp < cq {
                    col_idx.push(cp);
                    values.push(self.values[p]);
                    p += 1;
                } else if cq < cp {
                    col_idx.push(cq);
                    values.push(alpha * other.values[q]);
                    q += 1;
                } else {
                    col_idx.push(cp);
                    values.push(self.values[p] + alpha * other.values[q]);
                    p += 1;
                    q += 1;
                }
            }
            row_ptr[i + 1] = col_idx.len();
        }
        Ok(SparseSymMatrix {
            n: self.n,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Largest absolute mismatch between A and Aᵀ; zero for exactly
    /// symmetric storage.
    pub fn symmetry_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                let vt = self.get(j as usize, i);
                worst = worst.max((v - vt).abs());
            }
        }
        worst
    }

    /// Value at (i, j), zero when the entry is not stored.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[range.clone()].binary_search(&(j as u32)) {
            Ok(pos) => self.values[range.start + pos],
            Err(_) => 0.0,
        }
    }

    /// Dense copy, for small test problems and oracles.
    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut dense = nalgebra::DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                dense[(i, j as usize)] = v;
            }
        }
        dense
    }
}

/// Factors a symmetric positive definite matrix.
///
/// A non-positive pivot reports [`Error::NotPositiveDefinite`].
pub fn factor_spd(a: &SparseSymMatrix) -> Result<LdltFactor> {
    LdltFactor::new(a, true)
}

/// A solver for positive definite systems: direct factorization when
/// it succeeds, Jacobi preconditioned conjugate gradients otherwise.
pub struct SpdSolver<'a> {
    a: &'a SparseSymMatrix,
    factor: Option<LdltFactor>,
}

impl<'a> SpdSolver<'a> {
    pub fn new(a: &'a SparseSymMatrix) -> Self {
        let factor = LdltFactor::new(a, true).ok();
        SpdSolver { a, factor }
    }

    pub fn is_direct(&self) -> bool {
        self.factor.is_some()
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        match &self.factor {
            Some(f) => Ok(f.solve(b)),
            None => Ok(cg_solve(self.a, b, crate::config::CG_TOL, 10 * self.a.n())?.0),
        }
    }

    /// Direct solves are polished by iterative refinement; the
    /// conjugate gradient fallback already iterates to tolerance.
    pub fn solve_refined(&self, b: &[f64]) -> Result<Vec<f64>> {
        match &self.factor {
            Some(f) => Ok(f.solve_refined(self.a, b)),
            None => self.solve(b),
        }
    }
}

/// The factorization of K - σM together with the shift that was
/// actually used and the shifted matrix itself.
pub struct ShiftedFactor {
    pub factor: LdltFactor,
    pub shift: f64,
    pub matrix: SparseSymMatrix,
}

impl ShiftedFactor {
    pub fn solve_refined(&self, b: &[f64]) -> Vec<f64> {
        self.factor.solve_refined(&self.matrix, b)
    }
}

/// Factors K - σM, retrying with a slightly perturbed shift when the
/// factorization hits an exactly singular pivot.
pub fn factor_shifted(
    k: &SparseSymMatrix,
    m: &SparseSymMatrix,
    sigma: f64,
) -> Result<ShiftedFactor> {
    let scale = if sigma != 0.0 { sigma.abs() } else { 1.0 };
    for attempt in 0..=SHIFT_RETRIES {
        let shift = sigma + scale * SHIFT_PERTURBATION * attempt as f64;
        let c = k.add_scaled(m, -shift)?;
        match LdltFactor::new(&c, false) {
            Ok(factor) => {
                return Ok(ShiftedFactor {
                    factor,
                    shift,
                    matrix: c,
                })
            }
            Err(Error::ZeroPivot { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::ShiftSingular { shift: sigma })
}
