//! Bulk marking of triangles for refinement.
//!
//! Given per-triangle indicators, marking selects the smallest set of
//! triangles whose squared indicators account for a fraction ω of the
//! squared global estimator. Sorting descending and taking the
//! shortest sufficient prefix realizes the minimal cardinality; among
//! sets of equal cardinality the tie is broken by triangle id, so
//! identical inputs always mark identical sets.

use crate::config::DEFAULT_OMEGA;
use crate::error::Error;
use crate::estimator::IndicatorField;
use crate::Result;

/// The bulk fraction ω, strictly between 0 and 1.
#[derive(Clone, Copy, Debug)]
pub struct MarkParams {
    pub omega: f64,
}

impl MarkParams {
    pub fn new(omega: f64) -> Result<Self> {
        if !(omega > 0.0 && omega < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "bulk fraction must lie strictly between 0 and 1, got {omega}"
            )));
        }
        Ok(MarkParams { omega })
    }
}

impl Default for MarkParams {
    fn default() -> Self {
        MarkParams {
            omega: DEFAULT_OMEGA,
        }
    }
}

/// Marked triangle ids, or the converged flag when the global
/// estimator is exactly zero and nothing is left to refine.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MarkOutcome {
    pub marked: Vec<usize>,
    pub converged: bool,
}

/// Marks the minimal set of triangles with Σ η_T² ≥ ω·η_Ω².
pub fn mark(field: &IndicatorField, params: MarkParams) -> MarkOutcome {
    let threshold = params.omega * field.eta_global * field.eta_global;
    if field.eta_global == 0.0 {
        return MarkOutcome {
            marked: Vec::new(),
            converged: true,
        };
    }
    let mut order: Vec<usize> = (0..field.eta.len()).collect();
    order.sort_by(|&a, &b| field.eta[b].total_cmp(&field.eta[a]).then(a.cmp(&b)));
    let mut marked = Vec::new();
    let mut acc = 0.0;
    for t in order {
        acc += field.eta[t] * field.eta[t];
        marked.push(t);
        if acc >= threshold {
            break;
        }
    }
    MarkOutcome {
        marked,
        converged: false,
    }
}
