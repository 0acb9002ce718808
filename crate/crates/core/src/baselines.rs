//! Naive-randomization comparators.
//!
//! A randomized design replaces the scores of a fraction of each group's
//! individuals by that group's training base rate. Randomized individuals are
//! charged no features and everyone else is charged all `d`.
//!
//! Designs are evaluated by expectation by default: every individual with a
//! non-trivial fraction `f` contributes its own score with weight `1 - f` and
//! the base rate with weight `f`. Sampled evaluation replaces a seeded random
//! `round(f * |g|)` members of each group instead.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::Group;
use crate::metrics::{threshold_rates, MetricsError, Rates};
use crate::seed::{stream_rng, RANDOMIZE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Evaluation {
    Derandomized,
    Sampled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomizedDesign {
    pub fraction_a: f64,
    pub fraction_b: f64,
    pub threshold: f64,
    pub seed: u64,
    pub evaluation: Evaluation,
}

impl RandomizedDesign {
    pub fn derandomized(fraction_a: f64, fraction_b: f64, threshold: f64) -> Self {
        RandomizedDesign {
            fraction_a,
            fraction_b,
            threshold,
            seed: 0,
            evaluation: Evaluation::Derandomized,
        }
    }

    pub fn fraction(&self, g: Group) -> f64 {
        match g {
            Group::A => self.fraction_a,
            Group::B => self.fraction_b,
        }
    }
}

/// Scores after randomization, one or two weighted entries per source row.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WeightedScores {
    pub rows: Vec<usize>,
    pub scores: Vec<f64>,
    pub weights: Vec<f64>,
}

impl WeightedScores {
    fn push(&mut self, row: usize, score: f64, weight: f64) {
        self.rows.push(row);
        self.scores.push(score);
        self.weights.push(weight);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Labels and groups of the source rows, aligned with the entries.
    pub fn gather<T: Copy>(&self, per_row: &[T]) -> Vec<T> {
        self.rows.iter().map(|&i| per_row[i]).collect()
    }
}

/// Replaces a fraction of each group's scores by the group's base rate
/// (`base_rates[g as usize]`).
pub fn randomize_calibrated(
    scores: &[f64],
    groups: &[Group],
    base_rates: [f64; 2],
    design: &RandomizedDesign,
) -> WeightedScores {
    let mut out = WeightedScores::default();
    match design.evaluation {
        Evaluation::Derandomized => {
            for (i, (&s, &g)) in scores.iter().zip(groups).enumerate() {
                let f = design.fraction(g);
                if f < 1.0 {
                    out.push(i, s, 1.0 - f);
                }
                if f > 0.0 {
                    out.push(i, base_rates[g as usize], f);
                }
            }
        }
        Evaluation::Sampled => {
            let mut rng = stream_rng(design.seed, RANDOMIZE);
            let mut replaced = vec![false; scores.len()];
            for g in Group::BOTH {
                let mut members: Vec<usize> =
                    (0..scores.len()).filter(|&i| groups[i] == g).collect();
                let k = (design.fraction(g) * members.len() as f64).round() as usize;
                members.shuffle(&mut rng);
                for &i in &members[..k.min(members.len())] {
                    replaced[i] = true;
                }
            }
            for (i, (&s, &g)) in scores.iter().zip(groups).enumerate() {
                let v = if replaced[i] {
                    base_rates[g as usize]
                } else {
                    s
                };
                out.push(i, v, 1.0);
            }
        }
    }
    out
}

/// Mean features per individual: randomized individuals cost 0, others `d`.
pub fn randomized_budget(design: &RandomizedDesign, d: usize, n_a: usize, n_b: usize) -> f64 {
    let n = (n_a + n_b) as f64;
    let d = d as f64;
    ((1.0 - design.fraction_a) * n_a as f64 * d + (1.0 - design.fraction_b) * n_b as f64 * d) / n
}

/// Outcome of equalizing both error rates by randomizing the advantaged group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum EqualOddsOutcome {
    Feasible {
        advantaged: Group,
        fraction: f64,
        design: RandomizedDesign,
        /// `(FPR, FNR)` of each group after randomization, `[A, B]`.
        rates: [(f64, f64); 2],
    },
    Infeasible {
        advantaged: Group,
        /// `(FPR, FNR)` of each group before randomization, `[A, B]`.
        rates: [(f64, f64); 2],
        /// The constant-score point the advantaged group is pushed toward.
        trivial: (f64, f64),
    },
}

impl EqualOddsOutcome {
    pub fn is_feasible(&self) -> bool {
        matches!(self, EqualOddsOutcome::Feasible { .. })
    }
}

/// Searches the segment between the advantaged group's `(FPR, FNR)` at `t`
/// and the point its base rate yields when thresholded at `t` for the
/// smallest fraction that brings both rates within `tolerance` of the
/// disadvantaged group's. The advantaged group is the one with the smaller
/// `FPR + FNR`.
pub fn equal_odds_randomize(
    scores: &[f64],
    labels: &[u8],
    groups: &[Group],
    base_rates: [f64; 2],
    t: f64,
    tolerance: f64,
) -> Result<EqualOddsOutcome, MetricsError> {
    let r = threshold_rates(scores, &vec![1.0; scores.len()], labels, groups, t)?;
    let pair = |x: &Rates| (x.fpr, x.fnr);
    let rates = [pair(&r.a), pair(&r.b)];
    let advantaged = if rates[0].0 + rates[0].1 <= rates[1].0 + rates[1].1 {
        Group::A
    } else {
        Group::B
    };
    let p = rates[advantaged as usize];
    let q = rates[advantaged.other() as usize];
    let trivial = if base_rates[advantaged as usize] >= t {
        (1.0, 0.0)
    } else {
        (0.0, 1.0)
    };

    // |p + f (trivial - p) - q| <= tol per coordinate gives an interval in f.
    let mut lo: f64 = 0.0;
    let mut hi: f64 = 1.0;
    for (pc, qc, tc) in [(p.0, q.0, trivial.0), (p.1, q.1, trivial.1)] {
        let slope = tc - pc;
        let (a, b) = (qc - tolerance - pc, qc + tolerance - pc);
        if slope == 0.0 {
            if a > 0.0 || b < 0.0 {
                hi = -1.0;
            }
        } else {
            let (x, y) = (a / slope, b / slope);
            lo = lo.max(x.min(y));
            hi = hi.min(x.max(y));
        }
    }
    if lo > hi {
        return Ok(EqualOddsOutcome::Infeasible {
            advantaged,
            rates,
            trivial,
        });
    }
    let fraction = lo;
    let mut design = RandomizedDesign::derandomized(0.0, 0.0, t);
    match advantaged {
        Group::A => design.fraction_a = fraction,
        Group::B => design.fraction_b = fraction,
    }
    let mut after = rates;
    after[advantaged as usize] = (
        p.0 + fraction * (trivial.0 - p.0),
        p.1 + fraction * (trivial.1 - p.1),
    );
    Ok(EqualOddsOutcome::Feasible {
        advantaged,
        fraction,
        design,
        rates: after,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{generalized_rates, generalized_rates_weighted, mixture, rates_weighted};
    use Group::{A, B};

    fn fixture() -> (Vec<f64>, Vec<u8>, Vec<Group>) {
        let scores = vec![0.1, 0.9, 0.3, 0.8, 0.2, 0.6, 0.4, 0.7];
        let labels = vec![0, 1, 0, 1, 0, 1, 1, 0];
        let groups = vec![A, A, A, A, B, B, B, B];
        (scores, labels, groups)
    }

    #[test]
    fn zero_fraction_keeps_scores() {
        let (s, _, g) = fixture();
        let w = randomize_calibrated(
            &s,
            &g,
            [0.5, 0.5],
            &RandomizedDesign::derandomized(0.0, 0.0, 0.5),
        );
        assert_eq!(w.scores, s);
        assert!(w.weights.iter().all(|&x| x == 1.0));
    }

    #[test]
    fn derandomized_midpoint_matches_mixture() {
        let (s, y, g) = fixture();
        let mu = [0.4, 0.6];
        let base = generalized_rates(&s, &y, &g).unwrap();
        for f in [0.0, 0.5, 1.0] {
            let w = randomize_calibrated(&s, &g, mu, &RandomizedDesign::derandomized(f, 0.0, 0.5));
            let r = generalized_rates_weighted(&w.scores, &w.weights, &w.gather(&y), &w.gather(&g))
                .unwrap();
            let expect = mixture((base.a.fpr, base.a.fnr), mu[0], f);
            assert!((r.a.fpr - expect.0).abs() < 1e-12 && (r.a.fnr - expect.1).abs() < 1e-12);
            assert_eq!(r.b, base.b);
        }
    }

    #[test]
    fn sampled_replaces_rounded_count() {
        let (s, _, g) = fixture();
        let design = RandomizedDesign {
            fraction_a: 0.5,
            fraction_b: 1.0,
            threshold: 0.5,
            seed: 9,
            evaluation: Evaluation::Sampled,
        };
        let w = randomize_calibrated(&s, &g, [0.25, 0.75], &design);
        assert_eq!(w.len(), s.len());
        assert_eq!(w.scores[..4].iter().filter(|&&v| v == 0.25).count(), 2);
        assert!(w.scores[4..].iter().all(|&v| v == 0.75));
        assert_eq!(w, randomize_calibrated(&s, &g, [0.25, 0.75], &design));
    }

    #[test]
    fn budget_examples() {
        let b = |fa, fb| randomized_budget(&RandomizedDesign::derandomized(fa, fb, 0.5), 8, 50, 50);
        assert_eq!(b(1.0, 1.0), 0.0);
        assert_eq!(b(0.0, 0.0), 8.0);
        assert_eq!(b(0.5, 0.0), 6.0);
    }

    #[test]
    fn equal_groups_need_no_randomization() {
        let scores = vec![0.1, 0.9, 0.6, 0.1, 0.9, 0.6];
        let labels = vec![0, 1, 0, 0, 1, 0];
        let groups = vec![A, A, A, B, B, B];
        let out = equal_odds_randomize(&scores, &labels, &groups, [0.3, 0.3], 0.5, 0.02).unwrap();
        match out {
            EqualOddsOutcome::Feasible { fraction, .. } => assert_eq!(fraction, 0.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn segment_intersection_oracle() {
        // Group A: 10 negatives with FPR 0.1, 10 positives with FNR 0.1.
        // Group B: every score at 0.3 -> (FPR, FNR) = (0, 1), which is also
        // A's trivial point for base rate 0.4 < t = 0.5.
        let mut scores = Vec::new();
        let mut labels = Vec::new();
        let mut groups = Vec::new();
        for k in 0..10 {
            scores.push(if k == 0 { 0.9 } else { 0.1 });
            labels.push(0);
            scores.push(if k == 0 { 0.1 } else { 0.9 });
            labels.push(1);
            groups.extend([A, A]);
        }
        for _ in 0..5 {
            scores.extend([0.3, 0.3]);
            labels.extend([0, 1]);
            groups.extend([B, B]);
        }
        let tol = 0.02;
        let out = equal_odds_randomize(&scores, &labels, &groups, [0.4, 0.5], 0.5, tol).unwrap();
        let EqualOddsOutcome::Feasible {
            advantaged,
            fraction,
            design,
            rates,
        } = out
        else {
            panic!("expected feasible");
        };
        assert_eq!(advantaged, A);
        // Segment (0.1,0.1) -> (0,1): FPR within tol of 0 needs f >= 0.8,
        // FNR within tol of 1 needs f >= 0.9 - 0.02/0.9.
        let oracle = 0.8f64.max(0.88 / 0.9);
        assert!((fraction - oracle).abs() < 1e-12);
        assert!(fraction > 0.0 && fraction < 1.0);
        assert!((rates[0].0 - rates[1].0).abs() <= tol + 1e-12);
        assert!((rates[0].1 - rates[1].1).abs() <= tol + 1e-12);

        // The derandomized evaluation of the returned design lands on the same point.
        let w = randomize_calibrated(&scores, &groups, [0.4, 0.5], &design);
        let dec: Vec<f64> = w
            .scores
            .iter()
            .map(|&s| if s >= 0.5 { 1.0 } else { 0.0 })
            .collect();
        let r = rates_weighted(&dec, &w.weights, &w.gather(&labels), &w.gather(&groups)).unwrap();
        assert!((r.a.fpr - rates[0].0).abs() < 1e-12 && (r.a.fnr - rates[0].1).abs() < 1e-12);
    }

    #[test]
    fn disjoint_regions_are_infeasible() {
        // Advantaged A at (0, 0) is pushed toward (0, 1); B sits at (1, 0).
        let scores = vec![0.1, 0.9, 0.9, 0.1];
        let labels = vec![0, 1, 0, 1];
        let groups = vec![A, A, B, B];
        let out = equal_odds_randomize(&scores, &labels, &groups, [0.3, 0.3], 0.5, 0.02).unwrap();
        assert!(!out.is_feasible());
    }
}
