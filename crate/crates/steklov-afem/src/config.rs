//! Run parameters and the numeric tolerances shared across modules.
//!
//! Every tolerance that more than one module relies on lives here as a
//! documented constant, so changing one changes it everywhere and tests
//! can reference the same value the implementation uses.

use crate::error::Error;
use crate::mesh::DomainSpec;
use crate::Result;
use std::path::PathBuf;

/// Relative residual ‖Ku − λMu‖₂ / ‖Ku‖₂ required of every eigenpair
/// returned by the eigensolvers.
pub const EIGEN_RESIDUAL_TOL: f64 = 1e-10;

/// Backward error target for direct linear solves; iterative refinement
/// runs until the solve meets it or stops improving.
pub const SOLVE_BACKWARD_TOL: f64 = 1e-12;

/// Relative gap below which adjacent discrete eigenvalues are treated
/// as one cluster.
pub const CLUSTER_GAP: f64 = 1e-8;

/// Relative residual tolerance of the conjugate gradient fallback.
pub const CG_TOL: f64 = 1e-10;

/// Relative perturbation applied to the shift when a shifted
/// factorization hits a zero pivot.
pub const SHIFT_PERTURBATION: f64 = 1e-8;

/// Perturbed retries before a shifted factorization gives up.
pub const SHIFT_RETRIES: usize = 3;

/// Default bulk marking fraction ω.
pub const DEFAULT_OMEGA: f64 = 0.25;

/// Default cap on the number of degrees of freedom.
pub const DEFAULT_MAX_DOF: usize = 400_000;

/// Default diameter of the initial uniform mesh.
pub fn default_init_diameter() -> f64 {
    std::f64::consts::SQRT_2 / 128.0
}

/// The adaptive loop variants the driver can run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algorithm {
    /// Sparse eigensolve from scratch on every level.
    FullEigensolve,
    /// Plain inverse iteration: one solve with K per level, the iterate
    /// carried across meshes by prolongation.
    InverseIteration,
    /// Shifted inverse iteration: one solve with K - σM per level, the
    /// shift σ taken from the previous level's eigenvalue.
    ShiftedInverse,
    /// Shifted inverse iteration on uniformly refined meshes, without
    /// an estimator or marking.
    UniformShifted,
}

impl Algorithm {
    /// Stable identifier used in history files and by the CLI.
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::FullEigensolve => "1",
            Algorithm::InverseIteration => "2",
            Algorithm::ShiftedInverse => "3",
            Algorithm::UniformShifted => "scheme1",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" => Ok(Algorithm::FullEigensolve),
            "2" => Ok(Algorithm::InverseIteration),
            "3" => Ok(Algorithm::ShiftedInverse),
            "scheme1" => Ok(Algorithm::UniformShifted),
            other => Err(Error::InvalidConfig(format!(
                "unknown algorithm {other:?}, expected 1, 2, 3, or scheme1"
            ))),
        }
    }
}

/// Where the initial mesh comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum MeshSource {
    /// Generate a uniform mesh of the named domain with the given
    /// target diameter.
    Generate { domain: DomainSpec, diameter: f64 },
    /// Read the initial mesh from a file.
    File(PathBuf),
}

/// Parameters of one adaptive run.
///
/// At least one of `max_dof`, `max_iters`, `eta_tol` must be set; the
/// run stops at the first rule that triggers.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub source: MeshSource,
    pub algorithm: Algorithm,
    /// Index of the target eigenvalue, 1-based and counted in
    /// ascending order.
    pub k: usize,
    /// Bulk marking fraction, in (0, 1).
    pub omega: f64,
    /// Stop once the number of degrees of freedom reaches this.
    pub max_dof: Option<usize>,
    /// Stop after this many iterations.
    pub max_iters: Option<usize>,
    /// Stop once the global estimator falls below this.
    pub eta_tol: Option<f64>,
    /// Reference eigenvalue; when set, history records carry the
    /// absolute error against it.
    pub lambda_ref: Option<f64>,
}

impl RunConfig {
    /// A configuration with the default marking fraction and DOF cap.
    pub fn new(source: MeshSource, algorithm: Algorithm, k: usize) -> Self {
        RunConfig {
            source,
            algorithm,
            k,
            omega: DEFAULT_OMEGA,
            max_dof: Some(DEFAULT_MAX_DOF),
            max_iters: None,
            eta_tol: None,
            lambda_ref: None,
        }
    }

    /// Checks ranges and the presence of a stop rule.
    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::InvalidConfig("k must be at least 1".into()));
        }
        if !(self.omega > 0.0 && self.omega < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "omega must lie strictly between 0 and 1, got {}",
                self.omega
            )));
        }
        if let MeshSource::Generate { diameter, .. } = &self.source {
            if !(*diameter > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "mesh diameter must be positive, got {diameter}"
                )));
            }
        }
        if self.max_dof.is_none() && self.max_iters.is_none() && self.eta_tol.is_none() {
            return Err(Error::InvalidConfig(
                "at least one stop rule (max_dof, max_iters, eta_tol) is required".into(),
            ));
        }
        if let Some(tol) = self.eta_tol {
            if !(tol > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "eta_tol must be positive, got {tol}"
                )));
            }
        }
        if self.max_dof == Some(0) {
            return Err(Error::InvalidConfig("max_dof must be positive".into()));
        }
        if self.max_iters == Some(0) {
            return Err(Error::InvalidConfig("max_iters must be positive".into()));
        }
        Ok(())
    }

    /// The reference eigenvalue for error reporting: the explicit one
    /// when given, otherwise the built-in table value for generated
    /// domains.
    pub fn effective_lambda_ref(&self) -> Option<f64> {
        self.lambda_ref.or(match &self.source {
            MeshSource::Generate { domain, .. } => default_lambda_ref(*domain, self.k),
            MeshSource::File(_) => None,
        })
    }
}

/// Reference eigenvalues for the built-in domains on fine adaptive
/// meshes, used as the default when no explicit reference is given.
pub fn default_lambda_ref(domain: DomainSpec, k: usize) -> Option<f64> {
    match (domain, k) {
        (DomainSpec::Square, 1) => Some(0.24007909),
        (DomainSpec::Square, 2) => Some(1.49230397),
        (DomainSpec::Square, 4) => Some(2.08265094),
        (DomainSpec::LShape, 1) => Some(0.18296424),
        (DomainSpec::LShape, 2) => Some(0.89364690),
        (DomainSpec::LShape, 3) => Some(1.68860181),
        _ => None,
    }
}
