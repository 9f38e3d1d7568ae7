mod common;

use ilc::corpus::Label;
use ilc::eval::{compute_metrics, improvement, MetricsReport};
use proptest::prelude::*;

#[test]
fn reports_match_direct_counting_on_a_thousand_vectors() {
    let failures: Vec<String> = (0..1000).filter_map(common::metric_oracle_mismatch).collect();
    assert!(failures.is_empty(), "{failures:?}");
}

#[test]
fn headline_improvements() {
    let f = MetricsReport::from_counts;
    let at = |f1: f64| MetricsReport {
        f1_positive: f1,
        ..f(0, 0, 0, 1)
    };
    assert_eq!(improvement(&at(0.8099), &at(0.8759)), 6.60);
    assert_eq!(improvement(&at(0.8099), &at(0.8588)), 4.89);
    // prose elsewhere rounds this one to 2.31
    assert_eq!(improvement(&at(0.8099), &at(0.8331)), 2.32);
    assert_eq!(improvement(&at(0.8099), &at(0.8099)), 0.0);
}

fn label_vec(len: usize) -> impl Strategy<Value = Vec<Label>> {
    prop::collection::vec(prop::bool::ANY.prop_map(|b| if b { Label::Deceptive } else { Label::NonDeceptive }), len)
}

proptest! {
    #[test]
    fn accuracy_is_the_diagonal_share((preds, labels) in (1usize..300).prop_flat_map(|n| (label_vec(n), label_vec(n)))) {
        let r = compute_metrics(&preds, &labels).unwrap();
        prop_assert_eq!(r.accuracy, (r.tp + r.tn) as f64 / (r.tp + r.fp + r.fn_ + r.tn) as f64);
        prop_assert!((0.0..=1.0).contains(&r.f1_positive) && (0.0..=1.0).contains(&r.f1_macro));
    }

    #[test]
    fn reversing_samples_keeps_the_report((preds, labels) in (1usize..300).prop_flat_map(|n| (label_vec(n), label_vec(n)))) {
        let a = compute_metrics(&preds, &labels).unwrap();
        let rp: Vec<_> = preds.iter().rev().copied().collect();
        let rl: Vec<_> = labels.iter().rev().copied().collect();
        prop_assert_eq!(a, compute_metrics(&rp, &rl).unwrap());
    }
}
