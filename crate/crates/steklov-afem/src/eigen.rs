//! Eigenvalue solvers for the pencil (K, M).
//!
//! All solvers work in the inner product induced by K, where the
//! operators they iterate with are self-adjoint: the coarse solver runs
//! Lanczos on v ↦ K⁻¹Mv and keeps the largest reciprocals, the
//! shift-and-invert solver runs Lanczos on v ↦ -σ(K - σM)⁻¹Kv so that
//! eigenvalues near the shift dominate, and the single-step iterations
//! apply one solve and re-normalize. Every returned pair is verified
//! against the true residual ‖Ku - λMu‖₂ / ‖Ku‖₂, so the internal
//! convergence estimates never vouch for a result on their own.
//!
//! Eigenvectors are normalized to unit energy norm a(u, u) = 1 and
//! oriented so that the mean boundary trace is nonnegative, which keeps
//! repeated runs byte-for-byte reproducible.

use crate::assembly::FormPair;
use crate::config::{CLUSTER_GAP, EIGEN_RESIDUAL_TOL};
use crate::error::Error;
use crate::mesh::TriangleMesh;
use crate::sparse::{factor_shifted, SpdSolver};
use crate::Result;

/// One discrete eigenpair with its verified relative residual
/// ‖Ku - λMu‖₂ / ‖Ku‖₂. The coefficient vector has unit energy norm
/// and nonnegative mean boundary trace.
#[derive(Clone, Debug)]
pub struct DiscreteEigenpair {
    pub lambda: f64,
    pub coeffs: Vec<f64>,
    pub residual: f64,
}

/// Eigenpairs sorted by ascending eigenvalue.
#[derive(Clone, Debug, Default)]
pub struct EigenBasis {
    pub pairs: Vec<DiscreteEigenpair>,
}

impl EigenBasis {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// The maximal contiguous index range around `idx` in which
    /// consecutive eigenvalues differ by at most `rel_gap` relative to
    /// the larger magnitude. A well separated eigenvalue yields the
    /// singleton range `idx..idx + 1`.
    pub fn cluster_range(&self, idx: usize, rel_gap: f64) -> std::ops::Range<usize> {
        let close = |i: usize| {
            let a = self.pairs[i].lambda;
            let b = self.pairs[i + 1].lambda;
            (b - a).abs() <= rel_gap * a.abs().max(b.abs())
        };
        let mut lo = idx;
        while lo > 0 && close(lo - 1) {
            lo -= 1;
        }
        let mut hi = idx;
        while hi + 1 < self.pairs.len() && close(hi) {
            hi += 1;
        }
        lo..hi + 1
    }
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn scale(x: &mut [f64], s: f64) {
    for xi in x {
        *xi *= s;
    }
}

/// The Rayleigh quotient a(v, v) / b(v, v) of the pencil.
pub fn rayleigh_quotient(forms: &FormPair, v: &[f64]) -> Result<f64> {
    let n = forms.k.n();
    if v.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: v.len(),
        });
    }
    let kv = forms.k.apply(v);
    let mv = forms.m.apply(v);
    let den = dot(v, &mv);
    if !(den > 0.0) {
        return Err(Error::BoundaryNull);
    }
    Ok(dot(v, &kv) / den)
}

/// Normalizes a raw iterate into a [`DiscreteEigenpair`]: unit energy
/// norm, Rayleigh quotient eigenvalue, verified residual, and the sign
/// fixed so the mean boundary trace is nonnegative.
fn finalize(forms: &FormPair, mut u: Vec<f64>) -> Result<DiscreteEigenpair> {
    let ku = forms.k.apply(&u);
    let a2 = dot(&u, &ku);
    if !(a2 > 0.0) {
        return Err(Error::DegenerateStart);
    }
    let s = 1.0 / a2.sqrt();
    scale(&mut u, s);
    let mu = forms.m.apply(&u);
    let b2 = dot(&u, &mu);
    if !(b2 > 0.0) {
        return Err(Error::BoundaryNull);
    }
    let lambda = 1.0 / b2;
    let mut r2 = 0.0;
    let mut k2 = 0.0;
    for i in 0..u.len() {
        let kv = ku[i] * s;
        let r = kv - lambda * mu[i];
        r2 += r * r;
        k2 += kv * kv;
    }
    let residual = (r2 / k2).sqrt();
    if mu.iter().sum::<f64>() < 0.0 {
        scale(&mut u, -1.0);
    }
    Ok(DiscreteEigenpair {
        lambda,
        coeffs: u,
        residual,
    })
}

/// One inverse iteration step: solve Kũ = M·start and normalize. The
/// stiffness matrix is factored inside the call, so a driver should
/// call this once per mesh level.
pub fn inverse_step(forms: &FormPair, start: &[f64]) -> Result<DiscreteEigenpair> {
    let n = forms.k.n();
    if start.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: start.len(),
        });
    }
    let rhs = forms.m.apply(start);
    if rhs.iter().all(|&x| x == 0.0) {
        return Err(Error::DegenerateStart);
    }
    let solver = SpdSolver::new(&forms.k);
    let u = solver.solve_refined(&rhs)?;
    finalize(forms, u)
}

/// One shifted inverse iteration step: solve (K - σM)ũ = M·start and
/// normalize. Factors the shifted matrix inside the call, retrying with
/// a perturbed shift if σ lands exactly on an eigenvalue.
pub fn shifted_inverse_step(
    forms: &FormPair,
    shift: f64,
    start: &[f64],
) -> Result<DiscreteEigenpair> {
    let n = forms.k.n();
    if start.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: start.len(),
        });
    }
    let rhs = forms.m.apply(start);
    if rhs.iter().all(|&x| x == 0.0) {
        return Err(Error::DegenerateStart);
    }
    let sf = factor_shifted(&forms.k, &forms.m, shift)?;
    let u = sf.solve_refined(&rhs);
    finalize(forms, u)
}

/// Transfers nodal values from a mesh to its refinement by midpoint
/// interpolation, which reproduces the piecewise linear function
/// exactly. Rejects meshes that are not a single refinement apart.
pub fn prolong(coarse: &TriangleMesh, fine: &TriangleMesh, u: &[f64]) -> Result<Vec<f64>> {
    let nc = coarse.n_vertices();
    let nf = fine.n_vertices();
    if u.len() != nc {
        return Err(Error::DimensionMismatch {
            expected: nc,
            got: u.len(),
        });
    }
    if nf < nc {
        return Err(Error::Structure(
            "refined mesh has fewer vertices than its parent".into(),
        ));
    }
    for v in 0..nc {
        if coarse.vertex(v) != fine.vertex(v) {
            return Err(Error::Structure(format!(
                "vertex {v} moved between meshes; not a nested refinement"
            )));
        }
    }
    let mut out = Vec::with_capacity(nf);
    out.extend_from_slice(u);
    for v in nc..nf {
        let (a, b) = fine
            .vertex_parents(v)
            .ok_or_else(|| Error::Structure(format!("new vertex {v} has no parent edge")))?;
        let (a, b) = (a as usize, b as usize);
        if a >= nc || b >= nc {
            return Err(Error::Structure(format!(
                "vertex {v} splits an edge created by the same refinement; \
                 meshes are more than one refinement apart"
            )));
        }
        let pa = fine.vertex(a);
        let pb = fine.vertex(b);
        let mid = fine.vertex(v);
        if mid[0] != 0.5 * (pa[0] + pb[0]) || mid[1] != 0.5 * (pa[1] + pb[1]) {
            return Err(Error::Structure(format!(
                "vertex {v} is not the midpoint of its parent edge"
            )));
        }
        out.push(0.5 * (u[a] + u[b]));
    }
    Ok(out)
}

/// How Ritz values are ranked when selecting which pairs to extract.
#[derive(Clone, Copy, PartialEq)]
enum RitzOrder {
    /// Largest first; used with v ↦ K⁻¹Mv where the smallest
    /// eigenvalues of the pencil appear as the largest reciprocals.
    Largest,
    /// Largest magnitude first; used with the shift-and-invert
    /// operator, where eigenvalues nearest the shift dominate in
    /// either sign.
    LargestMagnitude,
}

/// Lanczos in the energy inner product with full reorthogonalization.
///
/// `op` must be self-adjoint in that inner product. The basis vectors
/// and their images under K are both stored so reorthogonalization
/// costs one dot product per kept vector. Every Krylov vector is also
/// kept orthogonal to the `deflate` set, so already-converged
/// eigenvectors can be excluded from the search. Extraction selects
/// `count` Ritz pairs by `order`, forms the Ritz vectors, and accepts
/// them only when every true pencil residual meets the tolerance. An
/// exhausted step budget restarts from the current best Ritz vector up
/// to `restarts` times before reporting stagnation.
#[allow(clippy::too_many_arguments)]
fn a_lanczos(
    forms: &FormPair,
    op: &mut dyn FnMut(&[f64]) -> Result<Vec<f64>>,
    start: Vec<f64>,
    count: usize,
    max_steps: usize,
    restarts: usize,
    order: RitzOrder,
    deflate: &[&[f64]],
) -> Result<EigenBasis> {
    let n = forms.k.n();
    if count == 0 {
        return Ok(EigenBasis::default());
    }
    let kds: Vec<Vec<f64>> = deflate.iter().map(|d| forms.k.apply(d)).collect();
    let drop_deflated = |w: &mut Vec<f64>| {
        for _ in 0..2 {
            for (d, kd) in deflate.iter().zip(&kds) {
                let c = dot(w, kd);
                axpy(w, -c, d);
            }
        }
    };
    let space = n - deflate.len().min(n);
    let mut q0 = start;
    let mut total_steps = 0;
    let mut worst = f64::INFINITY;
    for attempt in 0..=restarts {
        drop_deflated(&mut q0);
        let kq0 = forms.k.apply(&q0);
        let a2 = dot(&q0, &kq0);
        if !(a2 > 0.0) {
            return Err(Error::DegenerateStart);
        }
        let s = 1.0 / a2.sqrt();
        let mut qs: Vec<Vec<f64>> = Vec::new();
        let mut kqs: Vec<Vec<f64>> = Vec::new();
        {
            let mut q = q0.clone();
            let mut kq = kq0;
            scale(&mut q, s);
            scale(&mut kq, s);
            qs.push(q);
            kqs.push(kq);
        }
        let mut alpha: Vec<f64> = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let mut reseed = 0usize;
        loop {
            let j = alpha.len();
            let mut w = op(&qs[j])?;
            drop_deflated(&mut w);
            for pass in 0..2 {
                for i in 0..=j {
                    let c = dot(&w, &kqs[i]);
                    if pass == 0 && i == j {
                        alpha.push(c);
                    }
                    axpy(&mut w, -c, &qs[i]);
                }
            }
            total_steps += 1;

            let mut kw = forms.k.apply(&w);
            let b2 = dot(&w, &kw);
            let mut b = if b2 > 0.0 { b2.sqrt() } else { 0.0 };

            let steps_done = j + 1;
            let at_cap = steps_done >= max_steps || steps_done >= space;
            if steps_done >= count {
                if let Some(basis) =
                    try_extract(forms, &qs, &alpha, &beta, b, count, order, &mut worst)?
                {
                    return Ok(basis);
                }
            }
            if at_cap {
                break;
            }

            if b == 0.0 {
                // The Krylov space closed on an invariant subspace
                // before enough pairs converged. Inject the first
                // coordinate direction outside the current span and
                // let the tridiagonal matrix decouple into blocks.
                let mut found = false;
                while reseed < n {
                    let mut e = vec![0.0; n];
                    e[reseed] = 1.0;
                    reseed += 1;
                    drop_deflated(&mut e);
                    for _ in 0..2 {
                        for i in 0..=j {
                            let c = dot(&e, &kqs[i]);
                            axpy(&mut e, -c, &qs[i]);
                        }
                    }
                    let ke = forms.k.apply(&e);
                    let e2 = dot(&e, &ke);
                    if e2 > 0.0 {
                        w = e;
                        kw = ke;
                        b = e2.sqrt();
                        found = true;
                        break;
                    }
                }
                if !found {
                    break;
                }
                beta.push(0.0);
            } else {
                beta.push(b);
            }
            let inv = 1.0 / b;
            scale(&mut w, inv);
            scale(&mut kw, inv);
            qs.push(w);
            kqs.push(kw);
        }
        if attempt < restarts {
            // Restart from the best Ritz vector accumulated so far.
            if let Some(best) = best_ritz_vector(&qs, &alpha, &beta, order) {
                q0 = best;
            }
        }
    }
    Err(Error::EigenStagnation {
        steps: total_steps,
        residual: worst,
    })
}

/// Solves the tridiagonal Ritz problem and returns eigenvalues with
/// their eigenvector matrix, both unordered.
fn ritz_decompose(alpha: &[f64], beta: &[f64]) -> (nalgebra::DVector<f64>, nalgebra::DMatrix<f64>) {
    let m = alpha.len();
    let mut t = nalgebra::DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = t.symmetric_eigen();
    (eig.eigenvalues, eig.eigenvectors)
}

/// Indices of the `count` Ritz values preferred under `order`, best
/// first.
fn ranked_indices(thetas: &nalgebra::DVector<f64>, count: usize, order: RitzOrder) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..thetas.len()).collect();
    match order {
        RitzOrder::Largest => idx.sort_by(|&a, &b| thetas[b].total_cmp(&thetas[a])),
        RitzOrder::LargestMagnitude => {
            idx.sort_by(|&a, &b| thetas[b].abs().total_cmp(&thetas[a].abs()))
        }
    }
    idx.truncate(count);
    idx
}

/// Attempts extraction: cheap residual bounds first, then the true
/// pencil residual on the formed Ritz vectors. Returns the basis when
/// every requested pair passes, records the worst observed residual
/// otherwise.
#[allow(clippy::too_many_arguments)]
fn try_extract(
    forms: &FormPair,
    qs: &[Vec<f64>],
    alpha: &[f64],
    beta: &[f64],
    b_next: f64,
    count: usize,
    order: RitzOrder,
    worst: &mut f64,
) -> Result<Option<EigenBasis>> {
    let m = alpha.len();
    if m < count {
        return Ok(None);
    }
    let (thetas, vectors) = ritz_decompose(alpha, beta);
    let picked = ranked_indices(&thetas, count, order);
    let tscale = thetas.iter().fold(0.0f64, |acc, t| acc.max(t.abs()));
    let bound_tol = 1e-12 * tscale.max(f64::MIN_POSITIVE);
    let bounds_ok = picked
        .iter()
        .all(|&i| b_next * vectors[(m - 1, i)].abs() <= bound_tol);
    if !bounds_ok {
        return Ok(None);
    }
    let n = qs[0].len();
    let mut pairs = Vec::with_capacity(count);
    let mut attempt_worst: f64 = 0.0;
    for &i in &picked {
        let mut x = vec![0.0; n];
        for (r, q) in qs.iter().enumerate() {
            axpy(&mut x, vectors[(r, i)], q);
        }
        match finalize(forms, x) {
            Ok(pair) => {
                attempt_worst = attempt_worst.max(pair.residual);
                pairs.push(pair);
            }
            Err(Error::BoundaryNull) | Err(Error::DegenerateStart) => {
                *worst = worst.min(f64::INFINITY);
                return Ok(None);
            }
            Err(e) => return Err(e),
        }
    }
    *worst = attempt_worst;
    if attempt_worst <= EIGEN_RESIDUAL_TOL {
        pairs.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
        return Ok(Some(EigenBasis { pairs }));
    }
    Ok(None)
}

/// The top-ranked Ritz vector of the current decomposition, used to
/// restart a stagnated sweep.
fn best_ritz_vector(
    qs: &[Vec<f64>],
    alpha: &[f64],
    beta: &[f64],
    order: RitzOrder,
) -> Option<Vec<f64>> {
    if alpha.is_empty() {
        return None;
    }
    let (thetas, vectors) = ritz_decompose(alpha, beta);
    let picked = ranked_indices(&thetas, 1, order);
    let i = *picked.first()?;
    let n = qs[0].len();
    let mut x = vec![0.0; n];
    for (r, q) in qs.iter().enumerate() {
        axpy(&mut x, vectors[(r, i)], q);
    }
    Some(x)
}

/// How many deflated Lanczos rounds [`solve_coarse`] may use to fill
/// gaps its pivot-count verification uncovers.
const COMPLETENESS_ROUNDS: usize = 4;

/// Counts pencil eigenvalues strictly below `sigma` through the
/// inertia of K - σM: a congruence to the pencil's canonical form
/// shows its negative pivots are in bijection with those eigenvalues.
fn eigenvalues_below(forms: &FormPair, sigma: f64) -> Result<usize> {
    let sf = factor_shifted(&forms.k, &forms.m, sigma)?;
    Ok(forms.k.n() - sf.factor.positive_pivots())
}

/// The all-ones start vector of round zero, with a deterministic
/// perturbation in later rounds so a retry cannot stall in the same
/// symmetry-invariant subspace twice.
fn round_start(n: usize, round: usize) -> Vec<f64> {
    if round == 0 {
        return vec![1.0; n];
    }
    let mut state = (round as u64)
        .wrapping_mul(2862933555777941757)
        .wrapping_add(3037000493);
    (0..n)
        .map(|_| {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            1.0 + ((state >> 11) as f64 / (1u64 << 53) as f64 - 0.5)
        })
        .collect()
}

/// Merges freshly converged pairs into the accumulated list, dropping
/// any that duplicate an already-found eigendirection.
fn absorb_pairs(
    forms: &FormPair,
    found: &mut Vec<DiscreteEigenpair>,
    fresh: Vec<DiscreteEigenpair>,
) {
    for pair in fresh {
        let duplicate = found.iter().any(|old| {
            let overlap = dot(&forms.k.apply(&old.coeffs), &pair.coeffs).abs();
            overlap > 0.5
        });
        if !duplicate {
            found.push(pair);
        }
    }
    found.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
}

/// Computes the `count` smallest eigenpairs of the pencil by Lanczos on
/// v ↦ K⁻¹Mv in the energy inner product. The step budget per round is
/// 5·count + 50.
///
/// The round-zero start is the normalized all-ones vector, so repeated
/// runs are identical. On meshes with exact symmetries that start can
/// be orthogonal to part of the spectrum and the Krylov space then
/// closes over a subset of it, so every candidate answer is verified by
/// counting eigenvalues below the largest returned value via the
/// inertia of the shifted pencil. A shortfall triggers another round,
/// deflated against everything found so far and started from a
/// deterministically perturbed vector; eigenvalues within the cluster
/// tolerance of the cut are treated as one group.
pub fn solve_coarse(forms: &FormPair, count: usize) -> Result<EigenBasis> {
    let n = forms.k.n();
    if count == 0 {
        return Ok(EigenBasis::default());
    }
    if n < count + 2 {
        return Err(Error::InvalidConfig(format!(
            "{count} eigenpairs need at least {} unknowns, the mesh has {n}",
            count + 2
        )));
    }
    let solver = SpdSolver::new(&forms.k);
    let mut op = |v: &[f64]| -> Result<Vec<f64>> { solver.solve(&forms.m.apply(v)) };

    let mut found: Vec<DiscreteEigenpair> = Vec::new();
    let mut shortfall = count;
    for round in 0..COMPLETENESS_ROUNDS {
        let ask = shortfall.min(count).max(1);
        let deflate: Vec<&[f64]> = found.iter().map(|p| p.coeffs.as_slice()).collect();
        let result = a_lanczos(
            forms,
            &mut op,
            round_start(n, round),
            ask,
            5 * count + 50,
            0,
            RitzOrder::Largest,
            &deflate,
        );
        match result {
            Ok(basis) => absorb_pairs(forms, &mut found, basis.pairs),
            // A start vector swallowed by the deflated subspace or a
            // stalled sweep both mean this seed was unlucky; later
            // rounds start elsewhere.
            Err(Error::DegenerateStart) | Err(Error::EigenStagnation { .. }) => {}
            Err(e) => return Err(e),
        }

        if found.len() >= count {
            let cut = found[count - 1].lambda;
            let sigma = cut - cut.abs() * CLUSTER_GAP;
            let below = eigenvalues_below(forms, sigma)?;
            let have = found
                .iter()
                .take(count)
                .filter(|p| p.lambda < sigma)
                .count();
            if below == have {
                found.truncate(count);
                return Ok(EigenBasis { pairs: found });
            }
            shortfall = below - have;
        } else {
            shortfall = count - found.len();
        }
    }
    let worst = found
        .iter()
        .map(|p| p.residual)
        .fold(f64::INFINITY, f64::min);
    Err(Error::EigenStagnation {
        steps: COMPLETENESS_ROUNDS * (5 * count + 50),
        residual: worst,
    })
}

/// Computes the `count` eigenpairs nearest `sigma` by shift-and-invert
/// Lanczos with the warm `start` vector, typically an eigenvector
/// transferred from the previous mesh. Restarts from the best Ritz
/// vector up to three times before reporting stagnation.
pub fn solve_at_shift(
    forms: &FormPair,
    sigma: f64,
    start: &[f64],
    count: usize,
) -> Result<EigenBasis> {
    let n = forms.k.n();
    if count == 0 {
        return Ok(EigenBasis::default());
    }
    if n < count + 2 {
        return Err(Error::InvalidConfig(format!(
            "{count} eigenpairs need at least {} unknowns, the mesh has {n}",
            count + 2
        )));
    }
    if start.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: start.len(),
        });
    }
    let sf = factor_shifted(&forms.k, &forms.m, sigma)?;
    let shift = sf.shift;
    let mut op = |v: &[f64]| -> Result<Vec<f64>> {
        let kv = forms.k.apply(v);
        let mut u = sf.factor.solve(&kv);
        scale(&mut u, -shift);
        Ok(u)
    };
    a_lanczos(
        forms,
        &mut op,
        start.to_vec(),
        count,
        5 * count + 50,
        3,
        RitzOrder::LargestMagnitude,
        &[],
    )
}
