//! Shared helpers for the integration tests: a dense generalized
//! eigensolver that serves as an independent oracle for the sparse
//! code, inner-product utilities, and a small deterministic random
//! stream so that no test depends on an external seed.
#![allow(dead_code)]

use steklov_afem::assembly::{assemble, DofMap, FormPair};
use steklov_afem::mesh::{DomainSpec, TriangleMesh};

/// One eigenpair from the dense reference solve. The vector has unit
/// energy norm, matching the convention of the sparse eigensolver.
pub struct DensePair {
    pub lambda: f64,
    pub vector: Vec<f64>,
}

/// All finite eigenvalues of the pencil (K, M), ascending, computed by
/// a dense method that shares no code with the sparse solver: K is
/// factored as LLᵀ, the spectrum of L⁻¹MLᵀ⁻¹ gives the reciprocals
/// 1/λ, and zero modes (interior vertices, which the boundary form
/// does not see) are dropped.
pub fn dense_eigenbasis(forms: &FormPair) -> Vec<DensePair> {
    let k = forms.k.to_dense();
    let m = forms.m.to_dense();
    let n = k.nrows();
    let chol = k
        .clone()
        .cholesky()
        .expect("the energy form must be positive definite");
    let l = chol.l();
    let li_m = l
        .solve_lower_triangular(&m)
        .expect("triangular solve with a Cholesky factor cannot fail");
    let mut s = l
        .solve_lower_triangular(&li_m.transpose())
        .expect("triangular solve with a Cholesky factor cannot fail");
    // Symmetrize away the roundoff asymmetry before the eigensolve.
    for i in 0..n {
        for j in 0..i {
            let avg = 0.5 * (s[(i, j)] + s[(j, i)]);
            s[(i, j)] = avg;
            s[(j, i)] = avg;
        }
    }
    let eig = s.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mu_max = eig.eigenvalues[order[0]];
    assert!(mu_max > 0.0, "the boundary form must couple some vertex");

    let mut pairs = Vec::new();
    for &idx in &order {
        let mu = eig.eigenvalues[idx];
        if mu <= mu_max * 1e-10 {
            break;
        }
        let y = eig.eigenvectors.column(idx).into_owned();
        let u = l
            .transpose()
            .solve_upper_triangular(&y)
            .expect("triangular solve with a Cholesky factor cannot fail");
        // yᵀy = 1 already gives uᵀKu = 1; no rescaling needed.
        pairs.push(DensePair {
            lambda: 1.0 / mu,
            vector: u.iter().copied().collect(),
        });
    }
    pairs
}

/// The reciprocal spectrum 1/λ of the pencil, descending, with one
/// entry per degree of freedom: zero modes are kept as exact zeros.
/// This is the full spectrum of the solution operator that underlies
/// the iteration-contraction bound.
pub fn dense_mu_spectrum(forms: &FormPair) -> Vec<f64> {
    let n = forms.k.n();
    let pairs = dense_eigenbasis(forms);
    let mut mu: Vec<f64> = pairs.iter().map(|p| 1.0 / p.lambda).collect();
    mu.resize(n, 0.0);
    mu
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Energy inner product uᵀKv.
pub fn a_dot(forms: &FormPair, x: &[f64], y: &[f64]) -> f64 {
    dot(&forms.k.apply(x), y)
}

/// Boundary inner product uᵀMv.
pub fn b_dot(forms: &FormPair, x: &[f64], y: &[f64]) -> f64 {
    dot(&forms.m.apply(x), y)
}

pub fn a_norm(forms: &FormPair, x: &[f64]) -> f64 {
    a_dot(forms, x, x).sqrt()
}

/// Energy distance from a unit-energy vector to the line spanned by a
/// unit-energy eigenvector: √(1 − a(v,u)²).
pub fn a_distance_to_line(forms: &FormPair, v: &[f64], u: &[f64]) -> f64 {
    let c = a_dot(forms, v, u);
    (1.0 - c * c).max(0.0).sqrt()
}

/// Scales a vector to unit energy norm.
pub fn a_normalize(forms: &FormPair, v: &mut [f64]) {
    let s = 1.0 / a_norm(forms, v);
    for x in v {
        *x *= s;
    }
}

/// A uniform mesh with the requested subdivision count per unit edge.
pub fn uniform_mesh(domain: DomainSpec, m: u32) -> TriangleMesh {
    let diameter = std::f64::consts::SQRT_2 / m as f64;
    TriangleMesh::uniform(domain, diameter).expect("builtin domains always mesh")
}

pub fn forms_on(mesh: &TriangleMesh) -> FormPair {
    let dofs = DofMap::new(mesh);
    assemble(mesh, &dofs).expect("assembly of a valid mesh cannot fail")
}

/// A small multiplicative congruential stream, good enough to build
/// reproducible test vectors without pulling in a dependency.
pub struct Lcg(u64);

impl Lcg {
    pub fn new(seed: u64) -> Self {
        Lcg(seed
            .wrapping_mul(2862933555777941757)
            .wrapping_add(3037000493))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self
            .0
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        self.0
    }

    /// Uniform in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Uniform in [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    pub fn vector(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.uniform(-1.0, 1.0)).collect()
    }
}

/// Largest relative deviation |x − y| / max(|x|, |y|).
pub fn rel_err(x: f64, y: f64) -> f64 {
    (x - y).abs() / x.abs().max(y.abs()).max(f64::MIN_POSITIVE)
}
