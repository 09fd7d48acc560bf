//! The adaptive solve-estimate-mark-refine loops.
//!
//! Four strategies share one skeleton. Each iteration evaluates the
//! error indicators for the current eigenpair, records a history row,
//! checks the stop rules, bisects the marked triangles, carries the
//! eigenvector to the new mesh by prolongation, and produces the next
//! eigenpair. They differ only in the last step:
//!
//! * full eigensolve: a shift-and-invert eigensolve on every mesh,
//!   shifted to the previous eigenvalue and warm-started with the
//!   prolonged eigenvector;
//! * inverse iteration: a single unshifted solve per mesh, cheapest
//!   but only safe for the smallest eigenvalue, since the iteration
//!   contracts toward it no matter where it starts;
//! * shifted inverse iteration: a single solve with the matrix
//!   K - λM per mesh, which stays locked on the eigenvalue branch it
//!   was started on at the cost of one indefinite factorization;
//! * uniform: the shifted step on meshes refined everywhere, the
//!   non-adaptive baseline the adaptive runs are judged against.
//!
//! The initial mesh always gets a full eigensolve. That solve also
//! fixes the cluster structure for the rest of the run: eigenvalues
//! within a tiny relative gap of the target are treated as one group,
//! the full-eigensolve strategy keeps computing the whole group, and
//! the indicators are fed the group mean instead of the single
//! eigenvalue. On meshes without exact symmetries the group is almost
//! always the target eigenvalue alone.

use std::time::Instant;

use crate::assembly::{assemble, DofMap, FormPair};
use crate::config::{Algorithm, MeshSource, RunConfig, CLUSTER_GAP, DEFAULT_MAX_DOF};
use crate::eigen::{
    inverse_step, prolong, shifted_inverse_step, solve_at_shift, solve_coarse, DiscreteEigenpair,
    EigenBasis,
};
use crate::error::Error;
use crate::estimator::{indicator_field, IndicatorField};
use crate::marking::{mark, MarkOutcome, MarkParams};
use crate::mesh::TriangleMesh;
use crate::Result;

/// Eigenpairs requested beyond the target index at the initial solve,
/// so that cluster detection can see the gap above the target.
const COARSE_MARGIN: usize = 3;

/// Additional pairs requested on each retry of a stagnated initial
/// solve; widening the basis usually resolves the stagnation.
const COARSE_RETRY_STEP: usize = 4;

/// Retries granted to a stagnated initial solve.
const COARSE_RETRIES: usize = 2;

/// One row of a run's convergence history.
#[derive(Clone, Debug)]
pub struct HistoryRecord {
    /// Iteration number, counted from 1.
    pub iter: usize,
    /// Degrees of freedom (vertices) of this iteration's mesh.
    pub dofs: usize,
    /// Eigenvalue estimate on this iteration's mesh.
    pub lambda: f64,
    /// Global error estimate for the recorded eigenpair.
    pub eta_global: f64,
    /// Triangles marked for refinement on this mesh.
    pub marked_count: usize,
    /// Seconds elapsed since the run started.
    pub wall_time_s: f64,
}

/// Everything a run appends to, one record per iteration.
#[derive(Clone, Debug)]
pub struct ConvergenceHistory {
    pub algorithm: Algorithm,
    /// Index of the tracked eigenvalue, 1-based.
    pub k: usize,
    /// Reference eigenvalue for error columns, when one is known.
    pub lambda_ref: Option<f64>,
    pub records: Vec<HistoryRecord>,
}

/// Why the adaptive loop ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    /// The global error estimate is exactly zero.
    Converged,
    /// The global error estimate fell below the configured tolerance.
    EtaTol,
    /// The mesh reached the degree-of-freedom budget.
    MaxDof,
    /// The configured iteration budget is exhausted.
    MaxIters,
    /// An inverse-iteration step produced no usable iterate; the
    /// history up to the last good iterate is kept.
    DegenerateIterate,
}

impl StopReason {
    /// Stable identifier used in CLI output.
    pub fn name(self) -> &'static str {
        match self {
            StopReason::Converged => "converged",
            StopReason::EtaTol => "eta-tol",
            StopReason::MaxDof => "max-dof",
            StopReason::MaxIters => "max-iters",
            StopReason::DegenerateIterate => "degenerate-iterate",
        }
    }
}

/// Final state of a finished run.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub history: ConvergenceHistory,
    pub final_mesh: TriangleMesh,
    pub final_pair: DiscreteEigenpair,
    /// Indicators of `final_pair` on `final_mesh`, as used for the
    /// last marking decision.
    pub final_field: IndicatorField,
    pub stop_reason: StopReason,
}

/// Runs the adaptive loop selected by `config.algorithm` to one of the
/// configured stop rules.
///
/// The degree-of-freedom budget is always enforced, falling back to
/// the default cap when the configuration leaves it unset, so a loose
/// estimator tolerance cannot refine without bound.
pub fn run(config: &RunConfig) -> Result<RunOutcome> {
    config.validate()?;
    let clock = Instant::now();
    let params = MarkParams::new(config.omega)?;
    let max_dof = config.max_dof.unwrap_or(DEFAULT_MAX_DOF);

    let mut mesh = initial_mesh(config)?;
    let dof_map = DofMap::new(&mesh);
    let mut dofs = dof_map.total_dofs();
    let forms = assemble(&mesh, &dof_map)?;

    let basis = match coarse_basis(&forms, config.k) {
        Ok(basis) => basis,
        Err(err @ Error::EigenStagnation { .. }) => return Err(at_iteration(1, err)),
        Err(err) => return Err(err),
    };
    let cluster = basis.cluster_range(config.k - 1, CLUSTER_GAP);
    let q = cluster.len();
    let cluster_pos = config.k - 1 - cluster.start;
    let mut pair = basis.pairs[config.k - 1].clone();
    let mut lambda_est = mean_lambda(&basis.pairs[cluster]);

    let mut records: Vec<HistoryRecord> = Vec::new();
    let mut iter = 1usize;

    loop {
        let field = indicator_field(&mesh, &pair.coeffs, lambda_est)?;
        let outcome = match config.algorithm {
            Algorithm::UniformShifted => {
                let converged = field.eta_global == 0.0;
                MarkOutcome {
                    marked: if converged {
                        Vec::new()
                    } else {
                        (0..mesh.n_triangles()).collect()
                    },
                    converged,
                }
            }
            _ => mark(&field, params),
        };

        records.push(HistoryRecord {
            iter,
            dofs,
            lambda: pair.lambda,
            eta_global: field.eta_global,
            marked_count: outcome.marked.len(),
            wall_time_s: clock.elapsed().as_secs_f64(),
        });

        let stop = if outcome.converged {
            Some(StopReason::Converged)
        } else if config.eta_tol.is_some_and(|tol| field.eta_global <= tol) {
            Some(StopReason::EtaTol)
        } else if dofs >= max_dof {
            Some(StopReason::MaxDof)
        } else if config.max_iters.is_some_and(|cap| iter >= cap) {
            Some(StopReason::MaxIters)
        } else {
            None
        };
        if let Some(reason) = stop {
            return Ok(finish(config, records, mesh, pair, field, reason));
        }

        let fine = mesh.bisect(&outcome.marked)?;
        let fine_dof_map = DofMap::new(&fine);
        let fine_forms = assemble(&fine, &fine_dof_map)?;
        let start = prolong(&mesh, &fine, &pair.coeffs)?;

        match config.algorithm {
            Algorithm::FullEigensolve => {
                let fine_basis = solve_at_shift(&fine_forms, pair.lambda, &start, q)
                    .map_err(|err| at_iteration(iter + 1, err))?;
                pair = fine_basis.pairs[cluster_pos].clone();
                lambda_est = mean_lambda(&fine_basis.pairs);
            }
            Algorithm::InverseIteration => match inverse_step(&fine_forms, &start) {
                Ok(next) => {
                    pair = next;
                    lambda_est = pair.lambda;
                }
                Err(Error::DegenerateStart | Error::BoundaryNull) => {
                    let reason = StopReason::DegenerateIterate;
                    return Ok(finish(config, records, mesh, pair, field, reason));
                }
                Err(err) => return Err(at_iteration(iter + 1, err)),
            },
            Algorithm::ShiftedInverse | Algorithm::UniformShifted => {
                pair = shifted_inverse_step(&fine_forms, pair.lambda, &start)
                    .map_err(|err| at_iteration(iter + 1, err))?;
                lambda_est = pair.lambda;
            }
        }

        mesh = fine;
        dofs = fine_dof_map.total_dofs();
        iter += 1;
    }
}

/// Runs the non-adaptive multiscale scheme over an explicit mesh
/// sequence: a full eigensolve on the first mesh, then one shifted
/// inverse step per following mesh.
///
/// Each mesh must be a bisection refinement of the one before it, so
/// that prolongation is exact; the configured mesh source and stop
/// rules are ignored. Returns the eigenpair on the last mesh.
pub fn run_scheme_1(config: &RunConfig, meshes: &[TriangleMesh]) -> Result<DiscreteEigenpair> {
    config.validate()?;
    if meshes.is_empty() {
        return Err(Error::InvalidConfig("empty mesh sequence".into()));
    }

    let dof_map = DofMap::new(&meshes[0]);
    let forms = assemble(&meshes[0], &dof_map)?;
    let basis = match coarse_basis(&forms, config.k) {
        Ok(basis) => basis,
        Err(err @ Error::EigenStagnation { .. }) => return Err(at_iteration(1, err)),
        Err(err) => return Err(err),
    };
    let mut pair = basis.pairs[config.k - 1].clone();

    for (level, fine) in meshes.iter().enumerate().skip(1) {
        let fine_dof_map = DofMap::new(fine);
        let fine_forms = assemble(fine, &fine_dof_map)?;
        let start = prolong(&meshes[level - 1], fine, &pair.coeffs)?;
        pair = shifted_inverse_step(&fine_forms, pair.lambda, &start)
            .map_err(|err| at_iteration(level + 1, err))?;
    }
    Ok(pair)
}

fn initial_mesh(config: &RunConfig) -> Result<TriangleMesh> {
    match &config.source {
        MeshSource::Generate { domain, diameter } => TriangleMesh::uniform(*domain, *diameter),
        MeshSource::File(path) => crate::io::read_mesh(path),
    }
}

/// Full eigensolve on the initial mesh, asking for a few pairs beyond
/// the target. A stagnated solve is retried with a wider basis; other
/// errors propagate immediately.
fn coarse_basis(forms: &FormPair, k: usize) -> Result<EigenBasis> {
    let cap = forms.k.n().saturating_sub(2);
    if cap < k {
        return Err(Error::InvalidConfig(format!(
            "initial mesh with {} vertices is too small to resolve eigenvalue {}",
            forms.k.n(),
            k
        )));
    }
    let mut attempt = 0;
    loop {
        let count = (k + COARSE_MARGIN + attempt * COARSE_RETRY_STEP).min(cap);
        match solve_coarse(forms, count) {
            Err(Error::EigenStagnation { .. }) if attempt < COARSE_RETRIES && count < cap => {
                attempt += 1;
            }
            other => return other,
        }
    }
}

fn mean_lambda(pairs: &[DiscreteEigenpair]) -> f64 {
    pairs.iter().map(|p| p.lambda).sum::<f64>() / pairs.len() as f64
}

fn at_iteration(iteration: usize, source: Error) -> Error {
    Error::AtIteration {
        iteration,
        source: Box::new(source),
    }
}

fn finish(
    config: &RunConfig,
    records: Vec<HistoryRecord>,
    final_mesh: TriangleMesh,
    final_pair: DiscreteEigenpair,
    final_field: IndicatorField,
    stop_reason: StopReason,
) -> RunOutcome {
    RunOutcome {
        history: ConvergenceHistory {
            algorithm: config.algorithm,
            k: config.k,
            lambda_ref: config.effective_lambda_ref(),
            records,
        },
        final_mesh,
        final_pair,
        final_field,
        stop_reason,
    }
}
