//! Property tests for sweep filtering and group-budget curves.

use activefair::data::synthesize;
use activefair::experiments::{
    filter_equal_odds, prepare_experiment, sweep_group_budgets, ExperimentConfig, SweepConfig,
    SweepContext,
};
use activefair::forest::ForestConfig;
use activefair::metrics::{Design, GroupPoint, OperatingPoint};
use proptest::prelude::*;

fn point() -> impl Strategy<Value = OperatingPoint> {
    (
        0.0f64..1.0,
        0.0f64..1.0,
        0.0f64..1.0,
        0.0f64..1.0,
        0.0f64..6.0,
    )
        .prop_map(|(fa, na, fb, nb, budget)| {
            let g = |fpr: f64, fnr: f64| GroupPoint {
                fpr,
                fnr,
                gfpr: fpr,
                gfnr: fnr,
            };
            OperatingPoint {
                design: Design::Group {
                    budget_a: 0,
                    budget_b: 0,
                    threshold: 0.5,
                },
                a: g(fa, na),
                b: g(fb, nb),
                mean_budget: budget,
                n_a: 50,
                n_b: 30,
                class_counts: [[20, 30], [18, 12]],
            }
        })
}

proptest! {
    #[test]
    fn equal_odds_filter_grows_with_tolerance_and_cap(
        points in prop::collection::vec(point(), 1..60),
        eps in 0.0f64..0.3,
        extra_eps in 0.0f64..0.3,
        cap in 0.0f64..6.0,
        extra_cap in 0.0f64..3.0,
    ) {
        let tight = filter_equal_odds(&points, eps, cap);
        let loose = filter_equal_odds(&points, eps + extra_eps, cap + extra_cap);
        for s in &tight {
            prop_assert!(loose.iter().any(|l| l.point == s.point));
            prop_assert!((s.point.a.fpr - s.point.b.fpr).abs() <= eps);
            prop_assert!((s.point.a.fnr - s.point.b.fnr).abs() <= eps);
            prop_assert!(s.point.mean_budget <= cap + 1e-9);
        }
    }
}

#[test]
fn lowering_the_threshold_trades_false_negatives_for_false_positives() {
    let data = synthesize(800, 5, (0.85, 0.65), 6).unwrap();
    let config = ExperimentConfig {
        seed: 6,
        forest: ForestConfig {
            n_trees: 20,
            ..ForestConfig::default()
        },
        ..ExperimentConfig::default()
    };
    let exp = prepare_experiment(&data, &config).unwrap();
    let ctx = SweepContext::for_experiment(&exp).unwrap();
    let d = ctx.d();
    for b in 0..=d {
        let cfg = SweepConfig {
            budgets: vec![b],
            ..SweepConfig::defaults(d)
        };
        let mut curve: Vec<_> = sweep_group_budgets(&ctx, &cfg)
            .unwrap()
            .points
            .into_iter()
            .filter(|p| matches!(p.design, Design::Group { budget_a, budget_b, .. } if budget_a == b && budget_b == b))
            .collect();
        curve.sort_by(|p, q| p.design.threshold().total_cmp(&q.design.threshold()));
        for pair in curve.windows(2) {
            let (lower, higher) = (&pair[0], &pair[1]);
            for (x, y) in [(&lower.a, &higher.a), (&lower.b, &higher.b)] {
                assert!(
                    x.fpr >= y.fpr && x.fnr <= y.fnr,
                    "budget {b}: {x:?} vs {y:?}"
                );
            }
        }
    }
}
