//! Adaptive P1 finite elements for Steklov eigenvalue problems on
//! polygonal domains.
//!
//! The library solves the eigenvalue problem
//!
//! ```text
//! -Δu + u = 0   in Ω,        ∂u/∂n = λ u   on ∂Ω,
//! ```
//!
//! whose eigenvalues live on the boundary: the weak form pairs the full
//! H¹ inner product against a boundary L² mass term. Meshes of right
//! triangles are refined adaptively by newest vertex bisection, driven
//! by a residual error estimator and bulk (Dörfler) marking. Three
//! refinement loops are provided: a full sparse eigensolve per level,
//! plain inverse iteration carried across levels, and shifted inverse
//! iteration that reuses the previous level's eigenvalue as the shift.
//!
//! Modules:
//! - [`mesh`]: triangulations, uniform generation, bisection refinement
//! - [`assembly`]: P1 stiffness/mass and boundary mass matrices
//! - [`sparse`]: symmetric sparse storage, LDLᵀ factorization, CG
//! - [`eigen`]: Lanczos eigensolves and the iteration steps
//! - [`estimator`]: residual error indicators
//! - [`marking`]: bulk marking of triangles
//! - [`driver`]: the adaptive loops and their convergence histories
//! - [`io`]: mesh, history, and indicator file formats
//! - [`config`]: run parameters and tolerances

// Validation deliberately writes `!(x > 0.0)` so that NaN fails the
// check; the suggested `x <= 0.0` would let NaN through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// The numerical kernels walk several slices with one counter; the
// iterator rewrites clippy suggests hide that correspondence.
#![allow(clippy::needless_range_loop)]

pub mod assembly;
pub mod config;
pub mod driver;
pub mod eigen;
pub mod error;
pub mod estimator;
pub mod io;
pub mod marking;
pub mod mesh;
pub mod sparse;

pub use error::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
