//! Property tests for partial-input inference on random small trees.

use activefair::forest::{Node, PartialObservation, Predicate, Tree};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const D: usize = 4;
/// Feature `D - 1` is categorical with codes `0..CODES`.
const CODES: u32 = 3;

fn grow(nodes: &mut Vec<Node>, depth: usize, rng: &mut ChaCha8Rng) -> usize {
    let at = nodes.len();
    if depth == 0 || rng.random_bool(0.25) {
        let n_train = rng.random_range(1..20u64);
        let n_positive = rng.random_range(0..=n_train);
        nodes.push(Node::Leaf {
            n_train,
            n_positive,
        });
        return at;
    }
    let feature = rng.random_range(0..D);
    let predicate = if feature == D - 1 {
        Predicate::Equals(rng.random_range(0..CODES))
    } else {
        Predicate::LessEq(rng.random_range(-1.0..1.0))
    };
    nodes.push(Node::Leaf {
        n_train: 0,
        n_positive: 0,
    });
    let left = grow(nodes, depth - 1, rng);
    let right = grow(nodes, depth - 1, rng);
    let (l, r) = (&nodes[left], &nodes[right]);
    nodes[at] = Node::Split {
        feature,
        predicate,
        left,
        right,
        n_train: l.n_train() + r.n_train(),
        n_positive: l.n_positive() + r.n_positive(),
    };
    at
}

fn random_tree(seed: u64, smoothing: f64) -> Tree {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes = Vec::new();
    grow(&mut nodes, 3, &mut rng);
    Tree::new(nodes, D, smoothing).expect("generated trees are well formed")
}

fn random_row(seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut row: Vec<f64> = (0..D - 1).map(|_| rng.random_range(-1.2..1.2)).collect();
    row.push(f64::from(rng.random_range(0..CODES)));
    row
}

fn masked(row: &[f64], mask: u8) -> PartialObservation {
    PartialObservation::with_features(row, (0..D).filter(|j| mask >> j & 1 == 1))
}

fn smoothing() -> impl Strategy<Value = f64> {
    prop::sample::select(vec![0.0, 0.5, 1.0, 2.0])
}

proptest! {
    #[test]
    fn reached_leaf_weights_sum_to_one(seed in any::<u64>(), s in smoothing(), mask in 0u8..16) {
        let tree = random_tree(seed, s);
        let obs = masked(&random_row(seed), mask);
        let total: f64 = tree.reached_leaves(&obs).iter().map(|(_, w)| w).sum();
        prop_assert!((total - 1.0).abs() < 1e-9, "weights sum to {total}");
    }

    #[test]
    fn score_is_weighted_leaf_purity(seed in any::<u64>(), s in smoothing(), mask in 0u8..16) {
        let tree = random_tree(seed, s);
        let obs = masked(&random_row(seed), mask);
        let mixed: f64 = tree
            .reached_leaves(&obs)
            .iter()
            .map(|&(leaf, w)| w * tree.purity(leaf))
            .sum();
        prop_assert!((tree.score(&obs) - mixed).abs() < 1e-12);
    }

    #[test]
    fn acquiring_a_feature_never_widens_support(
        seed in any::<u64>(),
        s in smoothing(),
        mask in 0u8..16,
        extra in 0..D,
    ) {
        let tree = random_tree(seed, s);
        let row = random_row(seed);
        let before = tree.reached_leaves(&masked(&row, mask)).len();
        let after = tree.reached_leaves(&masked(&row, mask | 1 << extra)).len();
        prop_assert!(after <= before, "{before} leaves became {after}");
    }

    #[test]
    fn scores_are_probabilities(seed in any::<u64>(), s in smoothing(), mask in 0u8..16) {
        let tree = random_tree(seed, s);
        let p = tree.score(&masked(&random_row(seed), mask));
        prop_assert!((0.0..=1.0).contains(&p));
        if s > 0.0 {
            prop_assert!(p > 0.0 && p < 1.0, "smoothed score {p} touches a bound");
        }
    }

    #[test]
    fn full_mask_matches_single_path(seed in any::<u64>(), s in smoothing()) {
        let tree = random_tree(seed, s);
        let row = random_row(seed);
        prop_assert_eq!(tree.score(&PartialObservation::full(&row)), tree.predict_full(&row));
    }

    #[test]
    fn empty_mask_is_smoothed_base_rate(seed in any::<u64>(), s in smoothing()) {
        let tree = random_tree(seed, s);
        let p = tree.score(&PartialObservation::empty(&random_row(seed)));
        // (P + sL) / (N + 2sL) computed from the leaves alone.
        let (mut pos, mut n, mut leaves) = (0.0, 0.0, 0.0);
        for node in tree.nodes() {
            if let Node::Leaf { n_train, n_positive } = *node {
                pos += n_positive as f64;
                n += n_train as f64;
                leaves += 1.0;
            }
        }
        let expected = (pos + s * leaves) / (n + 2.0 * s * leaves);
        prop_assert!((p - expected).abs() < 1e-12, "{p} vs {expected}");
    }
}
