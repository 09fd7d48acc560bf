//! Sparse LDLᵀ factorization without pivoting.
//!
//! The matrix is permuted by the minimum degree order, its upper
//! triangle converted to column form, and factored up-looking along
//! the elimination tree. No pivoting is performed, which is exact for
//! positive definite matrices and works in practice for the mildly
//! indefinite shifted matrices this crate produces; an exactly zero
//! pivot is reported so the caller can retry with a perturbed shift.

use super::{amd_order, SparseSymMatrix};
use crate::config::SOLVE_BACKWARD_TOL;
use crate::error::Error;
use crate::Result;

const NO_PARENT: i64 = -1;

/// The factorization P A Pᵀ = L D Lᵀ with unit lower triangular L.
#[derive(Clone, Debug)]
pub struct LdltFactor {
    n: usize,
    perm: Vec<u32>,
    lp: Vec<usize>,
    li: Vec<u32>,
    lx: Vec<f64>,
    d: Vec<f64>,
    dinv: Vec<f64>,
}

/// Upper triangle of P A Pᵀ in compressed sparse column form.
struct PermutedUpper {
    col_ptr: Vec<usize>,
    row_idx: Vec<u32>,
    values: Vec<f64>,
}

fn permute_upper(a: &SparseSymMatrix, iperm: &[u32]) -> PermutedUpper {
    let n = a.n();
    let mut col_ptr = vec![0usize; n + 1];
    for i in 0..n {
        let pi = iperm[i];
        for (j, _) in a.row(i) {
            let pj = iperm[j as usize];
            if pi <= pj {
                col_ptr[pj as usize + 1] += 1;
            }
        }
    }
    for c in 0..n {
        col_ptr[c + 1] += col_ptr[c];
    }
    let mut fill = col_ptr.clone();
    let mut row_idx = vec![0u32; col_ptr[n]];
    let mut values = vec![0.0; col_ptr[n]];
    for i in 0..n {
        let pi = iperm[i];
        for (j, v) in a.row(i) {
            let pj = iperm[j as usize];
            if pi <= pj {
                let slot = fill[pj as usize];
                row_idx[slot] = pi;
                values[slot] = v;
                fill[pj as usize] += 1;
            }
        }
    }
    PermutedUpper {
        col_ptr,
        row_idx,
        values,
    }
}

/// Elimination tree and per-column counts of L for an upper triangular
/// pattern in column form.
fn etree_and_counts(n: usize, col_ptr: &[usize], row_idx: &[u32]) -> (Vec<i64>, Vec<usize>) {
    let mut parent = vec![NO_PARENT; n];
    let mut counts = vec![0usize; n];
    let mut visited = vec![usize::MAX; n];
    for j in 0..n {
        visited[j] = j;
        for p in col_ptr[j]..col_ptr[j + 1] {
            let mut i = row_idx[p] as usize;
            while visited[i] != j {
                if parent[i] == NO_PARENT {
                    parent[i] = j as i64;
                }
                counts[i] += 1;
                visited[i] = j;
                i = parent[i] as usize;
            }
        }
    }
    (parent, counts)
}

/// Number of off-diagonal entries L would have under the given
/// elimination order; cheap enough to compare candidate orderings.
pub fn symbolic_fill(a: &SparseSymMatrix, perm: &[u32]) -> usize {
    let mut iperm = vec![0u32; a.n()];
    for (k, &p) in perm.iter().enumerate() {
        iperm[p as usize] = k as u32;
    }
    let upper = permute_upper(a, &iperm);
    let (_, counts) = etree_and_counts(a.n(), &upper.col_ptr, &upper.row_idx);
    counts.iter().sum()
}

impl LdltFactor {
    /// Factors the matrix over a fresh minimum degree ordering.
    ///
    /// With `require_spd` every pivot must be strictly positive;
    /// otherwise any sign is accepted and only an exactly zero pivot is
    /// an error.
    pub fn new(a: &SparseSymMatrix, require_spd: bool) -> Result<Self> {
        let n = a.n();
        if n == 0 {
            return Err(Error::Structure("cannot factor an empty matrix".into()));
        }
        let perm = amd_order(n, a.row_ptr(), a.col_idx());
        let mut iperm = vec![0u32; n];
        for (k, &p) in perm.iter().enumerate() {
            iperm[p as usize] = k as u32;
        }
        let upper = permute_upper(a, &iperm);
        let (parent, counts) = etree_and_counts(n, &upper.col_ptr, &upper.row_idx);

        let mut lp = vec![0usize; n + 1];
        for c in 0..n {
            lp[c + 1] = lp[c] + counts[c];
        }
        let mut li = vec![0u32; lp[n]];
        let mut lx = vec![0.0f64; lp[n]];
        let mut d = vec![0.0f64; n];
        let mut dinv = vec![0.0f64; n];

        // Up-looking factorization: row k of L is the sparse solve of
        // L(0..k, 0..k) y = A(0..k, k), visited in elimination tree
        // order.
        let mut y_val = vec![0.0f64; n];
        let mut y_used = vec![false; n];
        let mut y_stack = vec![0u32; n];
        let mut path = vec![0u32; n];
        let mut next_in_col = lp[..n].to_vec();

        for k in 0..n {
            let mut stack_top = 0usize;
            d[k] = 0.0;
            for p in upper.col_ptr[k]..upper.col_ptr[k + 1] {
                let i = upper.row_idx[p] as usize;
                if i == k {
                    d[k] = upper.values[p];
                    continue;
                }
                y_val[i] = upper.values[p];
                if !y_used[i] {
                    y_used[i] = true;
                    path[0] = i as u32;
                    let mut path_len = 1usize;
                    let mut node = parent[i];
                    while node != NO_PARENT && (node as usize) < k && !y_used[node as usize] {
                        y_used[node as usize] = true;
                        path[path_len] = node as u32;
                        path_len += 1;
                        node = parent[node as usize];
                    }
                    // Reversing the path keeps the stack in tree order,
                    // ancestors processed after descendants.
                    while path_len > 0 {
                        path_len -= 1;
                        y_stack[stack_top] = path[path_len];
                        stack_top += 1;
                    }
                }
            }

            while stack_top > 0 {
                stack_top -= 1;
                let c = y_stack[stack_top] as usize;
                let yc = y_val[c];
                for q in lp[c]..next_in_col[c] {
                    y_val[li[q] as usize] -= lx[q] * yc;
                }
                let l_kc = yc * dinv[c];
                let slot = next_in_col[c];
                li[slot] = k as u32;
                lx[slot] = l_kc;
                next_in_col[c] += 1;
                d[k] -= yc * l_kc;
                y_val[c] = 0.0;
                y_used[c] = false;
            }

            if require_spd && !(d[k] > 0.0) {
                return Err(Error::NotPositiveDefinite {
                    column: perm[k] as usize,
                    pivot: d[k],
                });
            }
            if d[k] == 0.0 {
                return Err(Error::ZeroPivot {
                    column: perm[k] as usize,
                });
            }
            dinv[k] = 1.0 / d[k];
        }

        Ok(LdltFactor {
            n,
            perm,
            lp,
            li,
            lx,
            d,
            dinv,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Off-diagonal entries of L.
    pub fn fill(&self) -> usize {
        self.lx.len()
    }

    /// Number of positive pivots; with a shift between eigenvalues the
    /// complement counts how many lie below the shift.
    pub fn positive_pivots(&self) -> usize {
        self.d.iter().filter(|&&v| v > 0.0).count()
    }

    /// Solves A x = b with the factored matrix.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let mut x = vec![0.0; self.n];
        for k in 0..self.n {
            x[k] = b[self.perm[k] as usize];
        }
        for c in 0..self.n {
            let xc = x[c];
            if xc != 0.0 {
                for p in self.lp[c]..self.lp[c + 1] {
                    x[self.li[p] as usize] -= self.lx[p] * xc;
                }
            }
        }
        for k in 0..self.n {
            x[k] *= self.dinv[k];
        }
        for c in (0..self.n).rev() {
            let mut xc = x[c];
            for p in self.lp[c]..self.lp[c + 1] {
                xc -= self.lx[p] * x[self.li[p] as usize];
            }
            x[c] = xc;
        }
        let mut out = vec![0.0; self.n];
        for k in 0..self.n {
            out[self.perm[k] as usize] = x[k];
        }
        out
    }

    /// Solves A x = b and polishes x by iterative refinement until the
    /// normwise backward error reaches its target or stops improving.
    pub fn solve_refined(&self, a: &SparseSymMatrix, b: &[f64]) -> Vec<f64> {
        let mut x = self.solve(b);
        let norm_a = inf_norm_matrix(a);
        let norm_b = inf_norm(b);
        let mut r = vec![0.0; self.n];
        for _ in 0..3 {
            a.mul_into(&x, &mut r);
            for i in 0..self.n {
                r[i] = b[i] - r[i];
            }
            let scale = norm_a * inf_norm(&x) + norm_b;
            if scale == 0.0 || inf_norm(&r) <= SOLVE_BACKWARD_TOL * scale {
                break;
            }
            let dx = self.solve(&r);
            for i in 0..self.n {
                x[i] += dx[i];
            }
        }
        x
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, &x| m.max(x.abs()))
}

fn inf_norm_matrix(a: &SparseSymMatrix) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..a.n() {
        let mut row_sum = 0.0;
        for (_, v) in a.row(i) {
            row_sum += v.abs();
        }
        worst = worst.max(row_sum);
    }
    worst
}
