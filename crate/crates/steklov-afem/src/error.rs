//! Error type shared by every module in the crate.

use thiserror::Error;

/// Errors produced by mesh handling, assembly, linear algebra, the
/// eigenvalue iterations, and file I/O.
#[derive(Error, Debug)]
pub enum Error {
    /// A domain name that the mesh generator does not recognize.
    #[error("unsupported domain: {0}")]
    UnsupportedDomain(String),

    /// Geometrically invalid input, e.g. a degenerate triangle or a
    /// mesh diameter that is not strictly positive.
    #[error("invalid geometry: {0}")]
    Geometry(String),

    /// A mesh whose connectivity is structurally broken: hanging
    /// vertices, an edge shared by more than two triangles, indices out
    /// of range, or a refinement that is not nested in its parent.
    #[error("invalid mesh structure: {0}")]
    Structure(String),

    /// Vector or matrix sizes that do not match the mesh or each other.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A matrix passed to the positive definite factorization that is
    /// not positive definite.
    #[error("matrix is not positive definite (pivot {pivot} at column {column})")]
    NotPositiveDefinite { column: usize, pivot: f64 },

    /// An exactly zero pivot in the general symmetric factorization.
    #[error("zero pivot at column {column} during factorization")]
    ZeroPivot { column: usize },

    /// A shifted matrix K - σM that stayed numerically singular after
    /// the shift perturbation retries.
    #[error("shifted matrix is numerically singular at shift {shift}")]
    ShiftSingular { shift: f64 },

    /// An iterative linear solve that ran out of iterations before
    /// reaching its tolerance.
    #[error("linear solver stalled after {iterations} iterations (residual {residual:.3e})")]
    SolverStalled { iterations: usize, residual: f64 },

    /// An eigenvalue solve that exhausted its step budget before every
    /// requested pair met the residual tolerance.
    #[error("eigensolver stagnated after {steps} steps (worst residual {residual:.3e})")]
    EigenStagnation { steps: usize, residual: f64 },

    /// A solver failure tagged with the adaptive iteration where it
    /// happened.
    #[error("adaptive iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    /// An iteration started from a vector with no boundary component;
    /// such a vector is annihilated by the boundary mass matrix.
    #[error("start vector vanishes on the boundary")]
    DegenerateStart,

    /// A Rayleigh quotient of a vector whose boundary trace is zero;
    /// the quotient is undefined there.
    #[error("vector vanishes on the boundary, Rayleigh quotient undefined")]
    BoundaryNull,

    /// Run parameters that fail validation before any work is done.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A mesh, history, or configuration file that does not parse.
    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    /// An underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by what the user supplied (bad
    /// parameters, unreadable or malformed files) as opposed to
    /// numerical failures inside a run. The CLI maps input errors to
    /// exit code 1 and everything else to exit code 2.
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::UnsupportedDomain(_)
            | Error::InvalidConfig(_)
            | Error::Parse { .. }
            | Error::Io(_) => true,
            Error::AtIteration { source, .. } => source.is_input_error(),
            _ => false,
        }
    }
}
