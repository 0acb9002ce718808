//! Error rates, generalized error rates, calibration diagnostics, AUC and
//! Pareto utilities.
//!
//! Every rate function has a weighted core: each entry carries a non-negative
//! weight, which is how randomized designs are evaluated by expectation. The
//! unweighted functions give every row weight 1.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Group;

/// Default absolute tolerance for parity checks.
pub const DEFAULT_TOLERANCE: f64 = 0.02;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("group {group} has no {class} labels, so its rates are undefined")]
    UndefinedRate { group: Group, class: &'static str },
    #[error("AUC needs both classes present")]
    SingleClass,
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("base rate {0} must lie strictly between 0 and 1")]
    DegenerateBaseRate(f64),
    #[error("cost weights must be non-negative and not both zero")]
    ZeroWeights,
    #[error("need at least one bin")]
    NoBins,
}

/// False positive and false negative rates of one group, with the (weighted)
/// class counts they were computed from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub fpr: f64,
    pub fnr: f64,
    pub negatives: f64,
    pub positives: f64,
}

/// Per-group rates. For generalized rates `fpr`/`fnr` hold GFPR/GFNR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupRates {
    pub a: Rates,
    pub b: Rates,
}

/// Score-level rates share the layout of [`GroupRates`].
pub type GeneralizedRates = GroupRates;

impl GroupRates {
    pub fn get(&self, g: Group) -> &Rates {
        match g {
            Group::A => &self.a,
            Group::B => &self.b,
        }
    }

    pub fn d_fpr(&self) -> f64 {
        (self.a.fpr - self.b.fpr).abs()
    }

    pub fn d_fnr(&self) -> f64 {
        (self.a.fnr - self.b.fnr).abs()
    }
}

fn check_lengths(n: usize, others: &[(&str, usize)]) -> Result<(), MetricsError> {
    for &(name, len) in others {
        if len != n {
            return Err(MetricsError::LengthMismatch(format!(
                "{name} has {len} entries, expected {n}"
            )));
        }
    }
    Ok(())
}

/// Weighted per-group means of `loss(score, label)` split by label class:
/// `fpr` averages over negatives, `fnr` over positives.
fn weighted_group_rates(
    scores: &[f64],
    weights: &[f64],
    labels: &[u8],
    groups: &[Group],
    neg_loss: impl Fn(f64) -> f64,
    pos_loss: impl Fn(f64) -> f64,
) -> Result<GroupRates, MetricsError> {
    check_lengths(
        scores.len(),
        &[
            ("weights", weights.len()),
            ("labels", labels.len()),
            ("groups", groups.len()),
        ],
    )?;
    // [group][class] -> (weight sum, weighted loss sum)
    let mut acc = [[(0.0f64, 0.0f64); 2]; 2];
    for i in 0..scores.len() {
        let g = groups[i] as usize;
        let y = usize::from(labels[i]);
        let loss = if y == 1 {
            pos_loss(scores[i])
        } else {
            neg_loss(scores[i])
        };
        acc[g][y].0 += weights[i];
        acc[g][y].1 += weights[i] * loss;
    }
    let rates = |g: Group| -> Result<Rates, MetricsError> {
        let [(neg_w, neg_l), (pos_w, pos_l)] = acc[g as usize];
        if neg_w <= 0.0 {
            return Err(MetricsError::UndefinedRate {
                group: g,
                class: "negative",
            });
        }
        if pos_w <= 0.0 {
            return Err(MetricsError::UndefinedRate {
                group: g,
                class: "positive",
            });
        }
        Ok(Rates {
            fpr: neg_l / neg_w,
            fnr: pos_l / pos_w,
            negatives: neg_w,
            positives: pos_w,
        })
    };
    Ok(GroupRates {
        a: rates(Group::A)?,
        b: rates(Group::B)?,
    })
}

/// FPR = FP / (FP + TN), FNR = FN / (FN + TP), per group.
pub fn rates(
    decisions: &[u8],
    labels: &[u8],
    groups: &[Group],
) -> Result<GroupRates, MetricsError> {
    let scores: Vec<f64> = decisions.iter().map(|&d| f64::from(d)).collect();
    rates_weighted(&scores, &vec![1.0; scores.len()], labels, groups)
}

/// Decision rates where `decisions` are 0/1 valued and each row has a weight.
pub fn rates_weighted(
    decisions: &[f64],
    weights: &[f64],
    labels: &[u8],
    groups: &[Group],
) -> Result<GroupRates, MetricsError> {
    weighted_group_rates(decisions, weights, labels, groups, |d| d, |d| 1.0 - d)
}

/// GFPR = mean score over negatives, GFNR = mean of `1 - score` over positives.
pub fn generalized_rates(
    scores: &[f64],
    labels: &[u8],
    groups: &[Group],
) -> Result<GeneralizedRates, MetricsError> {
    generalized_rates_weighted(scores, &vec![1.0; scores.len()], labels, groups)
}

pub fn generalized_rates_weighted(
    scores: &[f64],
    weights: &[f64],
    labels: &[u8],
    groups: &[Group],
) -> Result<GeneralizedRates, MetricsError> {
    weighted_group_rates(scores, weights, labels, groups, |s| s, |s| 1.0 - s)
}

/// Thresholds scores at `t` (score >= t is positive) and computes rates.
pub fn threshold_rates(
    scores: &[f64],
    weights: &[f64],
    labels: &[u8],
    groups: &[Group],
    t: f64,
) -> Result<GroupRates, MetricsError> {
    let decisions: Vec<f64> = scores
        .iter()
        .map(|&s| if s >= t { 1.0 } else { 0.0 })
        .collect();
    rates_weighted(&decisions, weights, labels, groups)
}

/// Image of a group's generalized rates after replacing a fraction `f` of its
/// scores by the constant `mu`.
pub fn mixture(point: (f64, f64), mu: f64, f: f64) -> (f64, f64) {
    (
        (1.0 - f) * point.0 + f * mu,
        (1.0 - f) * point.1 + f * (1.0 - mu),
    )
}

/// Perpendicular distance from `(gfpr, gfnr)` to the calibrated-classifier
/// line `gfnr = gfpr * (1 - mu) / mu` through the origin.
pub fn calibration_line_deviation(gfpr: f64, gfnr: f64, mu: f64) -> Result<f64, MetricsError> {
    if !(mu > 0.0 && mu < 1.0) {
        return Err(MetricsError::DegenerateBaseRate(mu));
    }
    Ok(((1.0 - mu) * gfpr - mu * gfnr).abs() / ((1.0 - mu).powi(2) + mu * mu).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationBin {
    pub lower: f64,
    pub upper: f64,
    pub mean_score: f64,
    pub positive_rate: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    /// Occupied bins only, in ascending score order.
    pub bins: Vec<CalibrationBin>,
    /// Largest `|mean_score - positive_rate|` over occupied bins.
    pub max_gap: f64,
}

/// Equal-width reliability bins on `[0, 1]` over the rows selected by `mask`.
pub fn calibration_bins(
    scores: &[f64],
    labels: &[u8],
    mask: &[bool],
    n_bins: usize,
) -> Result<CalibrationReport, MetricsError> {
    if n_bins == 0 {
        return Err(MetricsError::NoBins);
    }
    check_lengths(
        scores.len(),
        &[("labels", labels.len()), ("mask", mask.len())],
    )?;
    let mut sums = vec![(0.0f64, 0usize, 0usize); n_bins];
    for i in (0..scores.len()).filter(|&i| mask[i]) {
        let k = ((scores[i] * n_bins as f64).floor() as usize).min(n_bins - 1);
        sums[k].0 += scores[i];
        sums[k].1 += usize::from(labels[i]);
        sums[k].2 += 1;
    }
    let width = 1.0 / n_bins as f64;
    let bins: Vec<CalibrationBin> = sums
        .iter()
        .enumerate()
        .filter(|(_, s)| s.2 > 0)
        .map(|(k, &(sum, pos, count))| CalibrationBin {
            lower: k as f64 * width,
            upper: (k + 1) as f64 * width,
            mean_score: sum / count as f64,
            positive_rate: pos as f64 / count as f64,
            count,
        })
        .collect();
    let max_gap = bins
        .iter()
        .map(|b| (b.mean_score - b.positive_rate).abs())
        .fold(0.0, f64::max);
    Ok(CalibrationReport { bins, max_gap })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EqualCost {
    pub cost_a: f64,
    pub cost_b: f64,
    pub gap: f64,
}

/// Weighted cost `w_fp * GFPR + w_fn * GFNR` per group and its parity gap.
pub fn equal_cost(
    rates: &GeneralizedRates,
    w_fp: f64,
    w_fn: f64,
) -> Result<EqualCost, MetricsError> {
    if !(w_fp >= 0.0 && w_fn >= 0.0) || (w_fp == 0.0 && w_fn == 0.0) {
        return Err(MetricsError::ZeroWeights);
    }
    let cost = |r: &Rates| w_fp * r.fpr + w_fn * r.fnr;
    let (cost_a, cost_b) = (cost(&rates.a), cost(&rates.b));
    Ok(EqualCost {
        cost_a,
        cost_b,
        gap: (cost_a - cost_b).abs(),
    })
}

/// Rank-based (Mann-Whitney) AUC; tied pairs count one half.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64, MetricsError> {
    check_lengths(scores.len(), &[("labels", labels.len())])?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[i].total_cmp(&scores[j]));
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricsError::SingleClass);
    }
    // Sum of midranks of the positives.
    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        let midrank = (start + end + 1) as f64 / 2.0;
        let pos_in_tie = order[start..end]
            .iter()
            .filter(|&&i| labels[i] == 1)
            .count();
        rank_sum += midrank * pos_in_tie as f64;
        start = end;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// `p` weakly dominates `q`: no worse in every coordinate.
pub fn weakly_dominates<const N: usize>(p: &[f64; N], q: &[f64; N]) -> bool {
    p.iter().zip(q).all(|(a, b)| a <= b)
}

/// `p` Pareto dominates `q`: no worse anywhere and strictly better somewhere.
pub fn dominates<const N: usize>(p: &[f64; N], q: &[f64; N]) -> bool {
    weakly_dominates(p, q) && p.iter().zip(q).any(|(a, b)| a < b)
}

/// Indices of the points no other point dominates, ordered lexicographically
/// by coordinates. Of several identical points only the lowest index is kept.
pub fn pareto_front<const N: usize>(points: &[[f64; N]]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| lex_cmp(&points[i], &points[j]).then(i.cmp(&j)));
    // A dominating point sorts earlier, and domination is transitive, so
    // checking against the front kept so far is enough.
    let mut front: Vec<usize> = Vec::new();
    for i in order {
        if !front
            .iter()
            .any(|&k| weakly_dominates(&points[k], &points[i]))
        {
            front.push(i);
        }
    }
    front
}

fn lex_cmp<const N: usize>(p: &[f64; N], q: &[f64; N]) -> Ordering {
    p.iter()
        .zip(q)
        .map(|(a, b)| a.total_cmp(b))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Non-dominated `(fpr, fnr)` points, ordered by FPR ascending.
pub fn pareto_filter(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let arr: Vec<[f64; 2]> = points.iter().map(|&(a, b)| [a, b]).collect();
    pareto_front(&arr).into_iter().map(|i| points[i]).collect()
}

/// Rate disparities between the groups and parity flags at a tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisparityReport {
    pub d_fpr: f64,
    pub d_fnr: f64,
    pub d_gfpr: f64,
    pub d_gfnr: f64,
    pub tolerance: f64,
    /// FNR parity within tolerance.
    pub equal_opportunity_ok: bool,
    /// FPR and FNR parity within tolerance.
    pub equal_odds_ok: bool,
}

impl DisparityReport {
    pub fn new(rates: &GroupRates, generalized: &GeneralizedRates, tolerance: f64) -> Self {
        let (d_fpr, d_fnr) = (rates.d_fpr(), rates.d_fnr());
        DisparityReport {
            d_fpr,
            d_fnr,
            d_gfpr: generalized.d_fpr(),
            d_gfnr: generalized.d_fnr(),
            tolerance,
            equal_opportunity_ok: d_fnr <= tolerance,
            equal_odds_ok: d_fpr <= tolerance && d_fnr <= tolerance,
        }
    }
}

/// Parameters of the classifier behind an operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Design {
    Group {
        budget_a: usize,
        budget_b: usize,
        threshold: f64,
    },
    Individual {
        alpha_low: f64,
        alpha_high: f64,
        threshold: f64,
        early_stop_eps: f64,
    },
    Randomized {
        fraction_a: f64,
        fraction_b: f64,
        threshold: f64,
    },
}

impl Design {
    pub fn family(&self) -> &'static str {
        match self {
            Design::Group { .. } => "group",
            Design::Individual { .. } => "individual",
            Design::Randomized { .. } => "randomized",
        }
    }

    pub fn threshold(&self) -> f64 {
        match *self {
            Design::Group { threshold, .. }
            | Design::Individual { threshold, .. }
            | Design::Randomized { threshold, .. } => threshold,
        }
    }
}

/// Decision and score-level rates of one group at an operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupPoint {
    pub fpr: f64,
    pub fnr: f64,
    pub gfpr: f64,
    pub gfnr: f64,
}

impl GroupPoint {
    pub fn from_rates(rates: &Rates, generalized: &Rates) -> Self {
        GroupPoint {
            fpr: rates.fpr,
            fnr: rates.fnr,
            gfpr: generalized.fpr,
            gfnr: generalized.fnr,
        }
    }
}

/// One classifier design evaluated on a labelled set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub design: Design,
    pub a: GroupPoint,
    pub b: GroupPoint,
    pub mean_budget: f64,
    /// Rows in group A and B.
    pub n_a: usize,
    pub n_b: usize,
    /// Negative and positive counts in group A and B, for pooling rates.
    pub class_counts: [[usize; 2]; 2],
}

impl OperatingPoint {
    pub fn group(&self, g: Group) -> &GroupPoint {
        match g {
            Group::A => &self.a,
            Group::B => &self.b,
        }
    }

    pub fn rates(&self) -> GroupRates {
        let r = |p: &GroupPoint, c: [usize; 2]| Rates {
            fpr: p.fpr,
            fnr: p.fnr,
            negatives: c[0] as f64,
            positives: c[1] as f64,
        };
        GroupRates {
            a: r(&self.a, self.class_counts[0]),
            b: r(&self.b, self.class_counts[1]),
        }
    }

    pub fn generalized(&self) -> GeneralizedRates {
        let r = |p: &GroupPoint, c: [usize; 2]| Rates {
            fpr: p.gfpr,
            fnr: p.gfnr,
            negatives: c[0] as f64,
            positives: c[1] as f64,
        };
        GroupRates {
            a: r(&self.a, self.class_counts[0]),
            b: r(&self.b, self.class_counts[1]),
        }
    }

    pub fn disparity(&self, tolerance: f64) -> DisparityReport {
        DisparityReport::new(&self.rates(), &self.generalized(), tolerance)
    }

    /// Overall `(FPR, FNR)`: each group's rate weighted by its share of the
    /// relevant label class.
    pub fn pooled(&self) -> (f64, f64) {
        let [[neg_a, pos_a], [neg_b, pos_b]] = self.class_counts.map(|c| c.map(|v| v as f64));
        (
            (self.a.fpr * neg_a + self.b.fpr * neg_b) / (neg_a + neg_b),
            (self.a.fnr * pos_a + self.b.fnr * pos_b) / (pos_a + pos_b),
        )
    }

    /// `[GFPR_A, GFNR_A, GFPR_B, GFNR_B]`.
    pub fn generalized_coords(&self) -> [f64; 4] {
        [self.a.gfpr, self.a.gfnr, self.b.gfpr, self.b.gfnr]
    }
}

/// Negative/positive counts per group, indexed `[group][label]`.
pub fn class_counts(labels: &[u8], groups: &[Group]) -> [[usize; 2]; 2] {
    let mut c = [[0usize; 2]; 2];
    for (&y, &g) in labels.iter().zip(groups) {
        c[g as usize][usize::from(y)] += 1;
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use Group::{A, B};

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn rates_hand_counted() {
        let r = rates(
            &[1, 0, 1, 0, 1, 0],
            &[1, 0, 0, 1, 1, 0],
            &[A, A, A, A, B, B],
        )
        .unwrap();
        assert_eq!((r.a.fpr, r.a.fnr), (0.5, 0.5));
        assert_eq!((r.b.fpr, r.b.fnr), (0.0, 0.0));
        let all_pos = rates(&[1, 1, 1, 1], &[1, 0, 1, 0], &[A, A, B, B]).unwrap();
        assert_eq!((all_pos.a.fpr, all_pos.a.fnr), (1.0, 0.0));
    }

    #[test]
    fn undefined_rates_are_errors() {
        let err = rates(&[1, 0, 1], &[1, 1, 0], &[A, A, B]).unwrap_err();
        assert_eq!(
            err,
            MetricsError::UndefinedRate {
                group: A,
                class: "negative"
            }
        );
    }

    #[test]
    fn generalized_rates_examples() {
        let g = generalized_rates(&[0.2, 0.8, 0.2, 0.8], &[0, 1, 0, 1], &[A, A, B, B]).unwrap();
        assert!(close(g.a.fpr, 0.2) && close(g.a.fnr, 0.2));
        let c = generalized_rates(&[0.3; 4], &[0, 1, 0, 1], &[A, A, B, B]).unwrap();
        assert!(close(c.b.fpr, 0.3) && close(c.b.fnr, 0.7));
    }

    #[test]
    fn calibration_line_examples() {
        assert!(close(
            calibration_line_deviation(0.3, 0.7, 0.3).unwrap(),
            0.0
        ));
        assert_eq!(calibration_line_deviation(0.0, 0.0, 0.4).unwrap(), 0.0);
        let d = calibration_line_deviation(0.2, 0.4, 0.5).unwrap();
        assert!(close(d, 0.2 / 2f64.sqrt()));
        assert!(calibration_line_deviation(0.2, 0.4, 1.0).is_err());
    }

    #[test]
    fn calibration_bins_examples() {
        let labels = [0, 1, 1, 0];
        let mask = [true; 4];
        let exact = calibration_bins(&[0.0, 1.0, 1.0, 0.0], &labels, &mask, 10).unwrap();
        assert_eq!(exact.bins.len(), 2);
        assert_eq!(exact.max_gap, 0.0);
        let anti = calibration_bins(&[1.0, 0.0, 0.0, 1.0], &labels, &mask, 10).unwrap();
        assert_eq!(anti.max_gap, 1.0);
        assert!(calibration_bins(&[0.5], &[1], &[true], 0).is_err());
    }

    #[test]
    fn equal_cost_reduces_to_single_rates() {
        let g = generalized_rates(&[0.1, 0.7, 0.3, 0.6], &[0, 1, 0, 1], &[A, A, B, B]).unwrap();
        assert!(close(equal_cost(&g, 1.0, 0.0).unwrap().gap, g.d_fpr()));
        assert!(close(equal_cost(&g, 0.0, 1.0).unwrap().gap, g.d_fnr()));
        assert_eq!(equal_cost(&g, 0.0, 0.0), Err(MetricsError::ZeroWeights));
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&[0.0, 1.0, 1.0, 0.0], &[0, 1, 1, 0]).unwrap(), 1.0);
        assert_eq!(auc(&[0.3; 4], &[0, 1, 1, 0]).unwrap(), 0.5);
        assert!(close(
            auc(&[0.1, 0.4, 0.35, 0.8], &[0, 0, 1, 1]).unwrap(),
            0.75
        ));
        assert_eq!(auc(&[0.1], &[1]), Err(MetricsError::SingleClass));
    }

    #[test]
    fn pareto_filter_examples() {
        assert_eq!(pareto_filter(&[(0.3, 0.3)]), vec![(0.3, 0.3)]);
        assert_eq!(
            pareto_filter(&[(0.2, 0.4), (0.1, 0.5)]),
            vec![(0.1, 0.5), (0.2, 0.4)]
        );
        assert_eq!(pareto_filter(&[(0.2, 0.5), (0.1, 0.4)]), vec![(0.1, 0.4)]);
    }

    #[test]
    fn pooled_rates_weight_by_class_counts() {
        let p = OperatingPoint {
            design: Design::Group {
                budget_a: 0,
                budget_b: 0,
                threshold: 0.5,
            },
            a: GroupPoint {
                fpr: 0.1,
                fnr: 0.2,
                gfpr: 0.0,
                gfnr: 0.0,
            },
            b: GroupPoint {
                fpr: 0.3,
                fnr: 0.6,
                gfpr: 0.0,
                gfnr: 0.0,
            },
            mean_budget: 0.0,
            n_a: 4,
            n_b: 8,
            class_counts: [[3, 1], [1, 7]],
        };
        let (fpr, fnr) = p.pooled();
        assert!(close(fpr, (0.3 + 0.3) / 4.0));
        assert!(close(fnr, (0.2 + 4.2) / 8.0));
    }

    fn scored_rows() -> impl Strategy<Value = (Vec<f64>, Vec<u8>, Vec<Group>)> {
        (4usize..60)
            .prop_flat_map(|n| {
                (
                    prop::collection::vec(0.0f64..=1.0, n),
                    prop::collection::vec(0u8..=1, n),
                    prop::collection::vec(prop::bool::ANY, n),
                )
            })
            .prop_map(|(s, mut y, g)| {
                let mut groups: Vec<Group> = g.into_iter().map(|a| if a { A } else { B }).collect();
                // Both classes in both groups.
                groups[..4].copy_from_slice(&[A, A, B, B]);
                y[..4].copy_from_slice(&[0, 1, 0, 1]);
                (s, y, groups)
            })
    }

    proptest! {
        #[test]
        fn binary_scores_give_identical_rates((s, y, g) in scored_rows()) {
            let d: Vec<u8> = s.iter().map(|&v| u8::from(v >= 0.5)).collect();
            let df: Vec<f64> = d.iter().map(|&v| f64::from(v)).collect();
            prop_assert_eq!(rates(&d, &y, &g).unwrap(), generalized_rates(&df, &y, &g).unwrap());
        }

        #[test]
        fn mixture_is_affine((s, y, g) in scored_rows(), f in 0.0f64..=1.0, mu in 0.05f64..0.95) {
            let base = generalized_rates(&s, &y, &g).unwrap();
            // Weighted evaluation of "fraction f replaced by mu" for group A.
            let mut scores = Vec::new();
            let mut weights = Vec::new();
            let mut labels = Vec::new();
            let mut groups = Vec::new();
            for i in 0..s.len() {
                let alts: Vec<(f64, f64)> = if g[i] == A { vec![(s[i], 1.0 - f), (mu, f)] } else { vec![(s[i], 1.0)] };
                for (v, w) in alts {
                    scores.push(v);
                    weights.push(w);
                    labels.push(y[i]);
                    groups.push(g[i]);
                }
            }
            let mixed = generalized_rates_weighted(&scores, &weights, &labels, &groups).unwrap();
            let expect = mixture((base.a.fpr, base.a.fnr), mu, f);
            prop_assert!((mixed.a.fpr - expect.0).abs() < 1e-9);
            prop_assert!((mixed.a.fnr - expect.1).abs() < 1e-9);
            prop_assert!((mixed.b.fpr - base.b.fpr).abs() < 1e-12);
        }

        #[test]
        fn auc_invariant_under_monotone_transform((s, y, _g) in scored_rows()) {
            let t: Vec<f64> = s.iter().map(|&v| (3.0 * v).exp() - 7.0).collect();
            prop_assert!((auc(&s, &y).unwrap() - auc(&t, &y).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn pareto_filter_is_idempotent(points in prop::collection::vec((0u8..10, 0u8..10), 1..40)) {
            let pts: Vec<(f64, f64)> = points.iter().map(|&(a, b)| (f64::from(a) / 10.0, f64::from(b) / 10.0)).collect();
            let once = pareto_filter(&pts);
            prop_assert!(!once.is_empty());
            prop_assert_eq!(pareto_filter(&once), once.clone());
            for p in &once {
                prop_assert!(!pts.iter().any(|q| dominates(&[q.0, q.1], &[p.0, p.1])));
            }
        }
    }
}
