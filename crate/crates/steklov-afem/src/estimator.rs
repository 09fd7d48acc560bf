//! Residual a posteriori error indicators.
//!
//! For a discrete eigenpair (λ, u) the error is estimated from two
//! sources: the volume term h_T²‖u‖²_{0,T}, which is the full interior
//! residual because piecewise linear functions have no second
//! derivatives, and edge residuals. Interior edges carry half the jump
//! of the normal derivative; boundary edges measure how far the pair is
//! from satisfying the boundary condition ∂u/∂n = λu. The local
//! indicator is
//!
//!   η_T² = h_T²‖u‖²_{0,T} + Σ_{ℓ ∈ edges(T)} |ℓ|·‖J_ℓ‖²_{0,ℓ}
//!
//! and the global estimator is the root sum of squares over all
//! triangles. Every integral here is evaluated exactly: the volume term
//! through the element mass matrix, constant interior jumps directly,
//! and the quadratic boundary integrand by two point Gauss quadrature.
//!
//! When the driver tracks a cluster of nearly equal eigenvalues it
//! passes the cluster mean in place of λ; nothing in this module is
//! aware of the distinction.

use crate::error::Error;
use crate::mesh::{EdgeOrientation, TriangleMesh};
use crate::Result;

/// Per-triangle indicators together with their root sum of squares.
#[derive(Clone, Debug)]
pub struct IndicatorField {
    pub eta: Vec<f64>,
    pub eta_global: f64,
}

/// The jump residual on one edge. Interior edges carry a constant,
/// boundary edges a linear function given by its values at the edge
/// endpoints in stored vertex order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum JumpResidual {
    Interior(f64),
    Boundary([f64; 2]),
}

/// The constant gradient of the piecewise linear function on one
/// triangle.
fn tri_gradient(mesh: &TriangleMesh, u: &[f64], t: usize) -> [f64; 2] {
    let tri = mesh.triangle(t);
    let c = mesh.corner_coords(t);
    let two_a = 2.0 * mesh.area(t);
    let mut g = [0.0, 0.0];
    for i in 0..3 {
        let j = (i + 1) % 3;
        let k = (i + 2) % 3;
        let ui = u[tri[i] as usize];
        g[0] += ui * (c[j][1] - c[k][1]);
        g[1] += ui * (c[k][0] - c[j][0]);
    }
    [g[0] / two_a, g[1] / two_a]
}

/// Evaluates the jump residual on the given edge.
///
/// Interior edges return ½(∇u|into - ∇u|from)·n with the normal fixed
/// by the orientation table; the indicator squares the value, so the
/// orientation convention is immaterial there. Boundary edges return
/// λu - ∂u/∂n at the two endpoints with the outward normal.
pub fn jump_residual(
    mesh: &TriangleMesh,
    orientations: &[EdgeOrientation],
    u: &[f64],
    lambda: f64,
    edge: usize,
) -> Result<JumpResidual> {
    if edge >= mesh.n_edges() || edge >= orientations.len() {
        return Err(Error::Structure(format!("unknown edge {edge}")));
    }
    if u.len() != mesh.n_vertices() {
        return Err(Error::DimensionMismatch {
            expected: mesh.n_vertices(),
            got: u.len(),
        });
    }
    let o = &orientations[edge];
    let g_from = tri_gradient(mesh, u, o.from_tri as usize);
    match o.into_tri {
        Some(t) => {
            let g_into = tri_gradient(mesh, u, t as usize);
            let j = 0.5
                * ((g_into[0] - g_from[0]) * o.normal[0] + (g_into[1] - g_from[1]) * o.normal[1]);
            Ok(JumpResidual::Interior(j))
        }
        None => {
            let dn = g_from[0] * o.normal[0] + g_from[1] * o.normal[1];
            let (a, b) = mesh.edges()[edge].vertices;
            Ok(JumpResidual::Boundary([
                lambda * u[a as usize] - dn,
                lambda * u[b as usize] - dn,
            ]))
        }
    }
}

/// The squared L² norm of a jump residual over an edge of the given
/// length. Constant jumps integrate directly; the quadratic boundary
/// integrand is handled by two point Gauss quadrature, which is exact
/// for it.
pub fn jump_norm_squared(jump: &JumpResidual, length: f64) -> f64 {
    match *jump {
        JumpResidual::Interior(j) => j * j * length,
        JumpResidual::Boundary([ja, jb]) => {
            let off = 0.5 / 3.0f64.sqrt();
            let v1 = ja + (jb - ja) * (0.5 - off);
            let v2 = ja + (jb - ja) * (0.5 + off);
            0.5 * length * (v1 * v1 + v2 * v2)
        }
    }
}

/// The squared L² norm of the piecewise linear function over one
/// triangle, via the exact element mass matrix.
fn volume_norm_squared(mesh: &TriangleMesh, u: &[f64], t: usize) -> f64 {
    let tri = mesh.triangle(t);
    let (u0, u1, u2) = (u[tri[0] as usize], u[tri[1] as usize], u[tri[2] as usize]);
    mesh.area(t) / 6.0 * (u0 * u0 + u1 * u1 + u2 * u2 + u0 * u1 + u0 * u2 + u1 * u2)
}

fn eta_squared(mesh: &TriangleMesh, edge_terms: &[f64], u: &[f64], t: usize) -> f64 {
    let h = mesh.diameter(t);
    let mut sum = h * h * volume_norm_squared(mesh, u, t);
    for e in mesh.triangle_edges(t) {
        sum += edge_terms[e as usize];
    }
    sum
}

/// Per-edge contribution |ℓ|·‖J_ℓ‖²_{0,ℓ} for every edge of the mesh.
fn edge_terms(
    mesh: &TriangleMesh,
    orientations: &[EdgeOrientation],
    u: &[f64],
    lambda: f64,
) -> Result<Vec<f64>> {
    let mut terms = Vec::with_capacity(mesh.n_edges());
    for e in 0..mesh.n_edges() {
        let jump = jump_residual(mesh, orientations, u, lambda, e)?;
        let len = mesh.edge_length(e);
        terms.push(len * jump_norm_squared(&jump, len));
    }
    Ok(terms)
}

/// The local indicator η_T for a single triangle.
pub fn local_indicator(mesh: &TriangleMesh, u: &[f64], lambda: f64, t: usize) -> Result<f64> {
    if t >= mesh.n_triangles() {
        return Err(Error::Structure(format!("unknown triangle {t}")));
    }
    let orientations = mesh.edge_orientations();
    let terms = edge_terms(mesh, &orientations, u, lambda)?;
    Ok(eta_squared(mesh, &terms, u, t).sqrt())
}

/// Collects per-triangle values into an [`IndicatorField`] with their
/// root sum of squares.
pub fn global_indicator(eta: &[f64]) -> IndicatorField {
    let eta_global = eta.iter().map(|e| e * e).sum::<f64>().sqrt();
    IndicatorField {
        eta: eta.to_vec(),
        eta_global,
    }
}

/// Evaluates every local indicator for the pair (λ, u) in one pass:
/// triangle gradients and edge residuals are computed once and shared
/// between the two triangles adjacent to each interior edge.
pub fn indicator_field(mesh: &TriangleMesh, u: &[f64], lambda: f64) -> Result<IndicatorField> {
    let orientations = mesh.edge_orientations();
    let terms = edge_terms(mesh, &orientations, u, lambda)?;
    let eta: Vec<f64> = (0..mesh.n_triangles())
        .map(|t| eta_squared(mesh, &terms, u, t).sqrt())
        .collect();
    Ok(global_indicator(&eta))
}
