//! Property tests for bulk marking: the returned set must reach the
//! requested share of the squared global estimator, no smaller set may
//! reach it, and the choice must be deterministic.

use proptest::prelude::*;
use steklov_afem::estimator::global_indicator;
use steklov_afem::marking::{mark, MarkParams};

/// Largest possible Σ η_T² over sets of the given size: the sum of the
/// `size` largest squared entries. If even that misses the threshold,
/// no set of that size can be a bulk set.
fn best_sum_of(etas: &[f64], size: usize) -> f64 {
    let mut sq: Vec<f64> = etas.iter().map(|e| e * e).collect();
    sq.sort_by(|a, b| b.total_cmp(a));
    sq.iter().take(size).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn marked_set_is_a_minimal_bulk_set(
        etas in prop::collection::vec(0.0_f64..1.0, 1..60),
        omega in 0.01_f64..0.99,
    ) {
        let field = global_indicator(&etas);
        let params = MarkParams::new(omega).unwrap();
        let outcome = mark(&field, params);

        let threshold = omega * field.eta_global * field.eta_global;
        if field.eta_global == 0.0 {
            prop_assert!(outcome.converged);
            prop_assert!(outcome.marked.is_empty());
            return Ok(());
        }
        prop_assert!(!outcome.converged);
        prop_assert!(!outcome.marked.is_empty());

        // Valid ids, no duplicates.
        let mut seen = vec![false; etas.len()];
        for &t in &outcome.marked {
            prop_assert!(t < etas.len());
            prop_assert!(!seen[t], "triangle {} marked twice", t);
            seen[t] = true;
        }

        // Reaches the bulk threshold.
        let marked_sum: f64 = outcome.marked.iter().map(|&t| etas[t] * etas[t]).sum();
        prop_assert!(
            marked_sum >= threshold * (1.0 - 1e-12),
            "marked {} of required {}",
            marked_sum,
            threshold
        );

        // Minimal cardinality: even the largest entries cannot reach
        // the threshold with one element fewer.
        prop_assert!(
            best_sum_of(&etas, outcome.marked.len() - 1) < threshold,
            "a smaller bulk set exists"
        );

        // Deterministic.
        let again = mark(&field, params);
        prop_assert_eq!(outcome, again);
    }
}

#[test]
fn zero_field_reports_convergence() {
    let field = global_indicator(&[0.0, 0.0, 0.0]);
    let outcome = mark(&field, MarkParams::new(0.5).unwrap());
    assert!(outcome.converged);
    assert!(outcome.marked.is_empty());
}

#[test]
fn single_dominant_entry_is_marked_alone() {
    let field = global_indicator(&[1e-8, 10.0, 1e-8, 1e-8]);
    let outcome = mark(&field, MarkParams::new(0.5).unwrap());
    assert_eq!(outcome.marked, vec![1]);
}

#[test]
fn exact_ties_break_toward_smaller_ids() {
    let field = global_indicator(&[4.0, 4.0, 4.0, 4.0]);
    let outcome = mark(&field, MarkParams::new(0.5).unwrap());
    assert_eq!(outcome.marked, vec![0, 1]);
}

#[test]
fn bulk_fraction_bounds_are_enforced() {
    assert!(MarkParams::new(0.0).is_err());
    assert!(MarkParams::new(1.0).is_err());
    assert!(MarkParams::new(-0.25).is_err());
    assert!(MarkParams::new(f64::NAN).is_err());
}
