//! P1 finite element assembly.
//!
//! The bilinear forms are a(u,v) = ∫_Ω ∇u·∇v + uv over the domain and
//! b(u,v) = ∫_∂Ω uv along the boundary. Both are assembled exactly:
//! the integrands are polynomial on each triangle and edge, so closed
//! formulas apply and quadrature is only used by tests as an oracle.
//! There is one degree of freedom per vertex and no constrained
//! degrees of freedom, since the boundary condition is natural.

use crate::error::Error;
use crate::mesh::TriangleMesh;
use crate::sparse::SparseSymMatrix;
use crate::Result;

/// Degree of freedom layout: vertex i carries coefficient i.
#[derive(Clone, Debug)]
pub struct DofMap {
    total_dofs: usize,
    boundary_dofs: Vec<u32>,
}

impl DofMap {
    pub fn new(mesh: &TriangleMesh) -> Self {
        let boundary_dofs = (0..mesh.n_vertices())
            .filter(|&v| mesh.is_boundary_vertex(v))
            .map(|v| v as u32)
            .collect();
        DofMap {
            total_dofs: mesh.n_vertices(),
            boundary_dofs,
        }
    }

    pub fn total_dofs(&self) -> usize {
        self.total_dofs
    }

    /// Vertex ids on the boundary, ascending.
    pub fn boundary_dofs(&self) -> &[u32] {
        &self.boundary_dofs
    }
}

/// The assembled matrices: K carries a(·,·), M carries b(·,·).
///
/// K is symmetric positive definite. M is positive semidefinite and
/// row i is entirely zero exactly when vertex i lies in the interior.
#[derive(Clone, Debug)]
pub struct FormPair {
    pub k: SparseSymMatrix,
    pub m: SparseSymMatrix,
}

/// ∫_T ∇φ_i·∇φ_j + φ_i φ_j for the linear basis on one triangle.
pub fn element_stiffness(coords: [[f64; 2]; 3]) -> Result<[[f64; 3]; 3]> {
    let grad = element_gradient_part(coords)?;
    let mass = element_mass_part(coords)?;
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = grad[i][j] + mass[i][j];
        }
    }
    Ok(out)
}

/// The ∫_T ∇φ_i·∇φ_j part; row sums vanish because constants have
/// zero gradient.
pub fn element_gradient_part(coords: [[f64; 2]; 3]) -> Result<[[f64; 3]; 3]> {
    let area2 = twice_area(coords)?;
    // ∇φ_i = (b_i, c_i) / (2 area) with the usual cyclic differences.
    let mut b = [0.0; 3];
    let mut c = [0.0; 3];
    for i in 0..3 {
        let j = (i + 1) % 3;
        let k = (i + 2) % 3;
        b[i] = coords[j][1] - coords[k][1];
        c[i] = coords[k][0] - coords[j][0];
    }
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (b[i] * b[j] + c[i] * c[j]) / (2.0 * area2);
        }
    }
    Ok(out)
}

/// The ∫_T φ_i φ_j part, area/12 · [[2,1,1],[1,2,1],[1,1,2]].
pub fn element_mass_part(coords: [[f64; 2]; 3]) -> Result<[[f64; 3]; 3]> {
    let area = twice_area(coords)? / 2.0;
    let mut out = [[area / 12.0; 3]; 3];
    for i in 0..3 {
        out[i][i] *= 2.0;
    }
    Ok(out)
}

/// ∫_ℓ ψ_i ψ_j for the linear basis on one boundary edge,
/// (|ℓ|/6)·[[2,1],[1,2]].
pub fn edge_boundary_mass(a: [f64; 2], b: [f64; 2]) -> Result<[[f64; 2]; 2]> {
    let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
    if !(len > 0.0) {
        return Err(Error::Geometry(format!(
            "zero-length edge between ({}, {}) and ({}, {})",
            a[0], a[1], b[0], b[1]
        )));
    }
    Ok([[len / 3.0, len / 6.0], [len / 6.0, len / 3.0]])
}

/// Assembles the form pair over the mesh by summing element and
/// boundary edge contributions.
pub fn assemble(mesh: &TriangleMesh, dofs: &DofMap) -> Result<FormPair> {
    let n = dofs.total_dofs();
    let mut k_trips = Vec::with_capacity(9 * mesh.n_triangles());
    for t in 0..mesh.n_triangles() {
        let tri = mesh.triangle(t);
        let local = element_stiffness(mesh.corner_coords(t))?;
        for i in 0..3 {
            for j in 0..3 {
                k_trips.push((tri[i], tri[j], local[i][j]));
            }
        }
    }

    let mut m_trips = Vec::new();
    for edge in mesh.edges() {
        if !edge.is_boundary() {
            continue;
        }
        let (a, b) = edge.vertices;
        let local = edge_boundary_mass(mesh.vertex(a as usize), mesh.vertex(b as usize))?;
        for (i, vi) in [a, b].into_iter().enumerate() {
            for (j, vj) in [a, b].into_iter().enumerate() {
                m_trips.push((vi, vj, local[i][j]));
            }
        }
    }

    Ok(FormPair {
        k: SparseSymMatrix::from_triplets(n, &k_trips)?,
        m: SparseSymMatrix::from_triplets(n, &m_trips)?,
    })
}

fn twice_area(coords: [[f64; 2]; 3]) -> Result<f64> {
    let area2 = (coords[1][0] - coords[0][0]) * (coords[2][1] - coords[0][1])
        - (coords[1][1] - coords[0][1]) * (coords[2][0] - coords[0][0]);
    if !(area2 > 0.0) {
        return Err(Error::Geometry(format!(
            "degenerate or clockwise triangle (signed area {:.3e})",
            area2 / 2.0
        )));
    }
    Ok(area2)
}
