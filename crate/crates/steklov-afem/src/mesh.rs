//! Conforming triangulations and newest vertex bisection.
//!
//! A triangle stores its vertices peak first: the edge spanned by the
//! second and third vertex is its refinement edge, and the newest
//! vertex created by a bisection becomes the peak of both children.
//! The uniform generators emit right isoceles triangles whose
//! hypotenuse is the refinement edge, so bisection reproduces the same
//! shape at every generation and the minimum angle stays at 45°.

use crate::error::Error;
use crate::Result;
use std::str::FromStr;

/// Built-in polygonal domains.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DomainSpec {
    /// The unit square (0,1)².
    Square,
    /// The unit square with the closed upper right quarter removed,
    /// leaving a re-entrant corner at (1/2, 1/2).
    LShape,
}

impl FromStr for DomainSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "square" => Ok(DomainSpec::Square),
            "lshape" => Ok(DomainSpec::LShape),
            other => Err(Error::UnsupportedDomain(other.to_string())),
        }
    }
}

/// An edge of the triangulation with its incident triangles.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    /// Endpoint indices, smaller first.
    pub vertices: (u32, u32),
    /// Incident triangles, smaller index first.
    pub tris: (u32, Option<u32>),
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.tris.1.is_none()
    }
}

/// Unit normal of an edge together with the triangles it separates.
///
/// For an interior edge the normal points from `from_tri` into
/// `into_tri`, the triangle with the larger index. For a boundary edge
/// it is the outward normal of the domain and `into_tri` is `None`.
#[derive(Clone, Copy, Debug)]
pub struct EdgeOrientation {
    pub edge: usize,
    pub normal: [f64; 2],
    pub from_tri: u32,
    pub into_tri: Option<u32>,
}

/// A conforming triangle mesh.
///
/// Construction validates the connectivity: every triangle is oriented
/// counterclockwise and non-degenerate, every edge is shared by at most
/// two triangles, and the boundary edges form closed loops (two per
/// boundary vertex). Vertex indices of a refined mesh extend those of
/// its parent, so nodal values transfer by index.
#[derive(Clone, Debug, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[u32; 3]>,
    generation: Vec<u32>,
    /// Endpoints of the parent edge for vertices created by the last
    /// bisection, `None` for vertices inherited from the parent mesh.
    vertex_parents: Vec<Option<(u32, u32)>>,
    edges: Vec<Edge>,
    /// Edge index opposite each local vertex; slot 0 is the
    /// refinement edge.
    tri_edges: Vec<[u32; 3]>,
    is_boundary_vertex: Vec<bool>,
}

impl TriangleMesh {
    /// Builds and validates a mesh from raw vertex and triangle lists.
    /// All triangles start at generation zero.
    pub fn new(vertices: Vec<[f64; 2]>, triangles: Vec<[u32; 3]>) -> Result<Self> {
        let generation = vec![0; triangles.len()];
        Self::with_history(vertices, triangles, generation, Vec::new())
    }

    fn with_history(
        vertices: Vec<[f64; 2]>,
        triangles: Vec<[u32; 3]>,
        generation: Vec<u32>,
        midpoints: Vec<(u32, u32)>,
    ) -> Result<Self> {
        if vertices.len() < 3 || triangles.is_empty() {
            return Err(Error::Structure(
                "a mesh needs at least three vertices and one triangle".into(),
            ));
        }
        let nv = vertices.len();
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                if v as usize >= nv {
                    return Err(Error::Structure(format!(
                        "triangle {t} references vertex {v} out of range"
                    )));
                }
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::Structure(format!("triangle {t} repeats a vertex")));
            }
            let area = signed_area(&vertices, tri);
            if !(area > 0.0) {
                return Err(Error::Geometry(format!(
                    "triangle {t} is degenerate or not counterclockwise (signed area {area:.3e})"
                )));
            }
        }

        let (edges, tri_edges) = build_edges(nv, &triangles)?;

        let mut is_boundary_vertex = vec![false; nv];
        let mut boundary_degree = vec![0u32; nv];
        for e in &edges {
            if e.is_boundary() {
                for v in [e.vertices.0, e.vertices.1] {
                    is_boundary_vertex[v as usize] = true;
                    boundary_degree[v as usize] += 1;
                }
            }
        }
        for (v, &deg) in boundary_degree.iter().enumerate() {
            if deg != 0 && deg != 2 {
                return Err(Error::Structure(format!(
                    "vertex {v} lies on {deg} boundary edges; the mesh is not conforming"
                )));
            }
        }

        let mut vertex_parents = vec![None; nv];
        let first_new = nv - midpoints.len();
        for (i, &pair) in midpoints.iter().enumerate() {
            vertex_parents[first_new + i] = Some(pair);
        }

        Ok(TriangleMesh {
            vertices,
            triangles,
            generation,
            vertex_parents,
            edges,
            tri_edges,
            is_boundary_vertex,
        })
    }

    /// Generates a uniform right isoceles triangulation whose largest
    /// triangle diameter is at most `diameter`.
    ///
    /// Squares of side 1/m are each split along the diagonal from the
    /// lower left to the upper right corner; the diagonal is the
    /// refinement edge of both triangles. For the L-shaped domain the
    /// grid count m is rounded up to an even number so the re-entrant
    /// corner falls on a grid point.
    pub fn uniform(domain: DomainSpec, diameter: f64) -> Result<Self> {
        if !(diameter > 0.0) {
            return Err(Error::Geometry(format!(
                "mesh diameter must be positive, got {diameter}"
            )));
        }
        let q = std::f64::consts::SQRT_2 / diameter;
        let mut m = (q - 1e-9).ceil().max(1.0) as usize;
        if domain == DomainSpec::LShape && m % 2 == 1 {
            m += 1;
        }
        let h = 1.0 / m as f64;

        let keep_vertex = |i: usize, j: usize| match domain {
            DomainSpec::Square => true,
            DomainSpec::LShape => !(i > m / 2 && j > m / 2),
        };
        let keep_cell = |i: usize, j: usize| match domain {
            DomainSpec::Square => true,
            DomainSpec::LShape => !(i >= m / 2 && j >= m / 2),
        };

        let mut index = vec![u32::MAX; (m + 1) * (m + 1)];
        let mut vertices = Vec::new();
        for j in 0..=m {
            for i in 0..=m {
                if keep_vertex(i, j) {
                    index[j * (m + 1) + i] = vertices.len() as u32;
                    vertices.push([i as f64 * h, j as f64 * h]);
                }
            }
        }

        let mut triangles = Vec::new();
        for j in 0..m {
            for i in 0..m {
                if !keep_cell(i, j) {
                    continue;
                }
                let v00 = index[j * (m + 1) + i];
                let v10 = index[j * (m + 1) + i + 1];
                let v01 = index[(j + 1) * (m + 1) + i];
                let v11 = index[(j + 1) * (m + 1) + i + 1];
                triangles.push([v10, v11, v00]);
                triangles.push([v01, v00, v11]);
            }
        }

        Self::new(vertices, triangles)
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn vertex(&self, v: usize) -> [f64; 2] {
        self.vertices[v]
    }

    pub fn triangle(&self, t: usize) -> [u32; 3] {
        self.triangles[t]
    }

    pub fn generation(&self, t: usize) -> u32 {
        self.generation[t]
    }

    /// Edge indices of triangle `t`, slot i opposite local vertex i.
    pub fn triangle_edges(&self, t: usize) -> [u32; 3] {
        self.tri_edges[t]
    }

    /// The edge bisection would split, spanned by the two non-peak
    /// vertices.
    pub fn refinement_edge(&self, t: usize) -> (u32, u32) {
        (self.triangles[t][1], self.triangles[t][2])
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.is_boundary_vertex[v]
    }

    pub fn n_boundary_vertices(&self) -> usize {
        self.is_boundary_vertex.iter().filter(|&&b| b).count()
    }

    /// Endpoints of the parent edge for a vertex created by the last
    /// bisection, `None` for inherited vertices.
    pub fn vertex_parents(&self, v: usize) -> Option<(u32, u32)> {
        self.vertex_parents[v]
    }

    pub fn corner_coords(&self, t: usize) -> [[f64; 2]; 3] {
        let tri = self.triangles[t];
        [
            self.vertices[tri[0] as usize],
            self.vertices[tri[1] as usize],
            self.vertices[tri[2] as usize],
        ]
    }

    pub fn area(&self, t: usize) -> f64 {
        0.5 * signed_area(&self.vertices, &self.triangles[t])
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let (a, b) = self.edges[e].vertices;
        let pa = self.vertices[a as usize];
        let pb = self.vertices[b as usize];
        ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt()
    }

    /// Diameter of triangle `t`, the length of its longest edge.
    pub fn diameter(&self, t: usize) -> f64 {
        let p = self.corner_coords(t);
        let mut d: f64 = 0.0;
        for i in 0..3 {
            let q = p[(i + 1) % 3];
            d = d.max(((q[0] - p[i][0]).powi(2) + (q[1] - p[i][1]).powi(2)).sqrt());
        }
        d
    }

    /// Smallest interior angle over all triangles, in degrees.
    pub fn min_angle_deg(&self) -> f64 {
        let mut min = f64::INFINITY;
        for t in 0..self.n_triangles() {
            let p = self.corner_coords(t);
            for i in 0..3 {
                let a = p[i];
                let b = p[(i + 1) % 3];
                let c = p[(i + 2) % 3];
                let u = [b[0] - a[0], b[1] - a[1]];
                let v = [c[0] - a[0], c[1] - a[1]];
                let dot = u[0] * v[0] + u[1] * v[1];
                let nu = (u[0] * u[0] + u[1] * u[1]).sqrt();
                let nv = (v[0] * v[0] + v[1] * v[1]).sqrt();
                let cos = (dot / (nu * nv)).clamp(-1.0, 1.0);
                min = min.min(cos.acos());
            }
        }
        min.to_degrees()
    }

    /// Unit normals for every edge; see [`EdgeOrientation`].
    pub fn edge_orientations(&self) -> Vec<EdgeOrientation> {
        let mut out = Vec::with_capacity(self.edges.len());
        for (e, edge) in self.edges.iter().enumerate() {
            let (a, b) = edge.vertices;
            let pa = self.vertices[a as usize];
            let pb = self.vertices[b as usize];
            let len = ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt();
            let mut normal = [(pb[1] - pa[1]) / len, -(pb[0] - pa[0]) / len];
            let mid = [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])];
            let from_tri = edge.tris.0;
            let into_tri = edge.tris.1;
            let target = match into_tri {
                // Point from the lower-indexed triangle into the higher.
                Some(t_hi) => {
                    let c_lo = self.centroid(from_tri as usize);
                    let c_hi = self.centroid(t_hi as usize);
                    [c_hi[0] - c_lo[0], c_hi[1] - c_lo[1]]
                }
                // Point out of the domain, away from the owner.
                None => {
                    let c = self.centroid(from_tri as usize);
                    [mid[0] - c[0], mid[1] - c[1]]
                }
            };
            if normal[0] * target[0] + normal[1] * target[1] < 0.0 {
                normal = [-normal[0], -normal[1]];
            }
            out.push(EdgeOrientation {
                edge: e,
                normal,
                from_tri,
                into_tri,
            });
        }
        out
    }

    fn centroid(&self, t: usize) -> [f64; 2] {
        let p = self.corner_coords(t);
        [
            (p[0][0] + p[1][0] + p[2][0]) / 3.0,
            (p[0][1] + p[1][1] + p[2][1]) / 3.0,
        ]
    }

    /// Newest vertex bisection of the marked triangles together with
    /// the closure that keeps the mesh conforming.
    ///
    /// Midpoint vertices are appended after the existing vertices, so
    /// the parent's indices remain valid in the refined mesh. Marking
    /// spreads by a fixpoint: whenever any edge of a triangle is due to
    /// be split, that triangle's refinement edge is split as well. A
    /// triangle is then bisected at its refinement edge, and a child is
    /// bisected again if its own refinement edge (a leg of the parent)
    /// was split too, so each input triangle yields up to four children.
    pub fn bisect(&self, marked: &[usize]) -> Result<TriangleMesh> {
        for &t in marked {
            if t >= self.n_triangles() {
                return Err(Error::Structure(format!(
                    "marked triangle {t} out of range ({} triangles)",
                    self.n_triangles()
                )));
            }
        }
        if marked.is_empty() {
            return Ok(self.clone());
        }

        // Fixpoint over split edges: marking a triangle splits its
        // refinement edge; any triangle touching a split edge must
        // split its refinement edge too.
        let ne = self.edges.len();
        let mut split = vec![false; ne];
        let mut queue: Vec<u32> = Vec::new();
        for &t in marked {
            let e = self.tri_edges[t][0];
            if !split[e as usize] {
                split[e as usize] = true;
                queue.push(e);
            }
        }
        while let Some(e) = queue.pop() {
            let edge = self.edges[e as usize];
            for t in [Some(edge.tris.0), edge.tris.1].into_iter().flatten() {
                let ref_edge = self.tri_edges[t as usize][0];
                if !split[ref_edge as usize] {
                    split[ref_edge as usize] = true;
                    queue.push(ref_edge);
                }
            }
        }

        // Midpoints in edge order keep vertex numbering deterministic.
        let mut midpoint = vec![u32::MAX; ne];
        let mut vertices = self.vertices.clone();
        let mut midpoint_parents = Vec::new();
        for (e, edge) in self.edges.iter().enumerate() {
            if split[e] {
                let (a, b) = edge.vertices;
                let pa = self.vertices[a as usize];
                let pb = self.vertices[b as usize];
                midpoint[e] = vertices.len() as u32;
                vertices.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
                midpoint_parents.push((a, b));
            }
        }

        let mut triangles = Vec::with_capacity(self.triangles.len() + 2 * midpoint_parents.len());
        let mut generation = Vec::with_capacity(triangles.capacity());
        for t in 0..self.n_triangles() {
            let [peak, a, b] = self.triangles[t];
            let [e_ref, e_leg_bp, e_leg_pa] = self.tri_edges[t];
            let gen = self.generation[t];
            if !split[e_ref as usize] {
                debug_assert!(!split[e_leg_bp as usize] && !split[e_leg_pa as usize]);
                triangles.push(self.triangles[t]);
                generation.push(gen);
                continue;
            }
            let m = midpoint[e_ref as usize];
            // Children keep the counterclockwise orientation, with the
            // new vertex as their peak and a parent leg as their
            // refinement edge.
            let c1 = [m, peak, a];
            let c2 = [m, b, peak];
            for (child, leg) in [(c1, e_leg_pa), (c2, e_leg_bp)] {
                if split[leg as usize] {
                    let m2 = midpoint[leg as usize];
                    let [p, x, y] = child;
                    triangles.push([m2, p, x]);
                    triangles.push([m2, y, p]);
                    generation.push(gen + 2);
                    generation.push(gen + 2);
                } else {
                    triangles.push(child);
                    generation.push(gen + 1);
                }
            }
        }

        Self::with_history(vertices, triangles, generation, midpoint_parents)
    }
}

fn signed_area(vertices: &[[f64; 2]], tri: &[u32; 3]) -> f64 {
    let a = vertices[tri[0] as usize];
    let b = vertices[tri[1] as usize];
    let c = vertices[tri[2] as usize];
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

/// Collects the edge list and the triangle-to-edge table, rejecting
/// edges shared by more than two triangles.
fn build_edges(nv: usize, triangles: &[[u32; 3]]) -> Result<(Vec<Edge>, Vec<[u32; 3]>)> {
    let nv = nv as u64;
    // Key packs the sorted endpoint pair so a plain sort groups the
    // two sides of an interior edge next to each other.
    let mut slots: Vec<(u64, u32, u8)> = Vec::with_capacity(3 * triangles.len());
    for (t, tri) in triangles.iter().enumerate() {
        for (slot, (a, b)) in [(tri[1], tri[2]), (tri[2], tri[0]), (tri[0], tri[1])]
            .into_iter()
            .enumerate()
        {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            slots.push((lo as u64 * nv + hi as u64, t as u32, slot as u8));
        }
    }
    slots.sort_unstable();

    let mut edges = Vec::new();
    let mut tri_edges = vec![[u32::MAX; 3]; triangles.len()];
    let mut i = 0;
    while i < slots.len() {
        let (key, t0, s0) = slots[i];
        let mut count = 1;
        while i + count < slots.len() && slots[i + count].0 == key {
            count += 1;
        }
        if count > 2 {
            return Err(Error::Structure(format!(
                "edge ({}, {}) is shared by {count} triangles",
                key / nv,
                key % nv
            )));
        }
        let e = edges.len() as u32;
        tri_edges[t0 as usize][s0 as usize] = e;
        let second = if count == 2 {
            let (_, t1, s1) = slots[i + 1];
            tri_edges[t1 as usize][s1 as usize] = e;
            Some(t1)
        } else {
            None
        };
        edges.push(Edge {
            vertices: ((key / nv) as u32, (key % nv) as u32),
            tris: (t0, second),
        });
        i += count;
    }
    Ok((edges, tri_edges))
}
