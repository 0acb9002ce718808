//! Active classifiers: group-level budgets and individual-level inquiry.
//!
//! The feature sequence an individual would be asked for does not depend on
//! the confidence band: static selection walks a fixed ranking and greedy
//! selection only looks at the answers collected so far. An inquiry is
//! therefore a stopping rule applied to the individual's acquisition path,
//! which lets sweeps compute each path once and evaluate many policies on it.
//! [`run_inquiry`] builds the path lazily and stops as soon as the rule fires.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acquisition::{AcquisitionError, AcquisitionStrategy};
use crate::data::{Dataset, Group};
use crate::forest::{Forest, PartialObservation};
use crate::metrics::{auc, MetricsError};

#[derive(Debug, Error, PartialEq)]
pub enum PolicyError {
    #[error(transparent)]
    Acquisition(#[from] AcquisitionError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error("budget {budget} exceeds the {d} available features")]
    BudgetOutOfRange { budget: usize, d: usize },
    #[error("early-stopping grid is empty")]
    EmptyGrid,
    #[error("validation set is empty")]
    EmptyValidation,
}

/// Scores every member of group A with `budget_a` features and every member
/// of group B with `budget_b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupBudgetPolicy {
    pub budget_a: usize,
    pub budget_b: usize,
    pub threshold: f64,
}

impl GroupBudgetPolicy {
    pub fn budget(&self, g: Group) -> usize {
        match g {
            Group::A => self.budget_a,
            Group::B => self.budget_b,
        }
    }
}

/// Confidence-band inquiry: keep acquiring while the score stays within
/// `[alpha_low, alpha_high]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndividualPolicy {
    pub alpha_low: f64,
    pub alpha_high: f64,
    pub threshold: f64,
    /// Stop once `early_stop_window` consecutive acquisitions each moved the
    /// score by less than this. Zero disables early stopping.
    pub early_stop_eps: f64,
    pub early_stop_window: usize,
}

impl IndividualPolicy {
    /// Policy with early stopping disabled.
    pub fn new(alpha_low: f64, alpha_high: f64, threshold: f64) -> Result<Self, PolicyError> {
        let p = IndividualPolicy {
            alpha_low,
            alpha_high,
            threshold,
            early_stop_eps: 0.0,
            early_stop_window: 1,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_early_stop(self, eps: f64, window: usize) -> Result<Self, PolicyError> {
        let p = IndividualPolicy {
            early_stop_eps: eps,
            early_stop_window: window,
            ..self
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        let bad = |m: String| Err(PolicyError::InvalidPolicy(m));
        if !(0.0 < self.alpha_low && self.alpha_low < self.alpha_high && self.alpha_high < 1.0) {
            return bad(format!(
                "need 0 < alpha_low < alpha_high < 1, got ({}, {})",
                self.alpha_low, self.alpha_high
            ));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return bad(format!("threshold {} outside [0, 1]", self.threshold));
        }
        if !(self.early_stop_eps >= 0.0 && self.early_stop_eps.is_finite()) {
            return bad(format!(
                "early_stop_eps {} must be finite and >= 0",
                self.early_stop_eps
            ));
        }
        if self.early_stop_window == 0 {
            return bad("early_stop_window must be >= 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    ConfidentHigh,
    ConfidentLow,
    Exhausted,
    EarlyStop,
}

/// Record of one individual's inquiry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InquiryTrace {
    /// Features in acquisition order.
    pub acquired: Vec<usize>,
    /// Score before any acquisition, then after each one.
    pub probabilities: Vec<f64>,
    pub stop_reason: StopReason,
    pub decision: u8,
}

impl InquiryTrace {
    pub fn budget(&self) -> usize {
        self.acquired.len()
    }

    pub fn final_score(&self) -> f64 {
        *self
            .probabilities
            .last()
            .expect("trace holds the initial score")
    }
}

/// One line of the trace export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub row: usize,
    pub group: Group,
    pub budget: usize,
    #[serde(flatten)]
    pub trace: InquiryTrace,
}

/// The features an individual is asked for, in order, with the score after
/// each answer.
#[derive(Debug, Clone, PartialEq)]
pub struct AcquisitionPath {
    pub acquired: Vec<usize>,
    pub probabilities: Vec<f64>,
}

/// Acquires up to `steps` features of `row` with `strategy`.
pub fn acquisition_path(
    forest: &Forest,
    strategy: &AcquisitionStrategy,
    row: &[f64],
    steps: usize,
) -> Result<AcquisitionPath, PolicyError> {
    let d = row.len();
    if steps > d {
        return Err(PolicyError::BudgetOutOfRange { budget: steps, d });
    }
    let mut obs = PartialObservation::empty(row);
    let mut path = AcquisitionPath {
        acquired: Vec::with_capacity(steps),
        probabilities: vec![forest.predict_partial(&obs)],
    };
    for _ in 0..steps {
        extend(forest, strategy, &mut obs, &mut path)?;
    }
    Ok(path)
}

fn extend(
    forest: &Forest,
    strategy: &AcquisitionStrategy,
    obs: &mut PartialObservation,
    path: &mut AcquisitionPath,
) -> Result<(), PolicyError> {
    let j = strategy.next_feature(forest, obs)?;
    obs.acquire(j);
    path.acquired.push(j);
    path.probabilities.push(forest.predict_partial(obs));
    Ok(())
}

/// True iff the last `window` acquisitions each changed the score by less
/// than `eps`. Needs at least `window` acquisitions.
pub fn early_stopping(scores: &[f64], eps: f64, window: usize) -> bool {
    if window == 0 || scores.len() < window + 1 {
        return false;
    }
    scores[scores.len() - window - 1..]
        .windows(2)
        .all(|w| (w[1] - w[0]).abs() < eps)
}

/// Whether an inquiry whose scores so far are `scores` stops here, and why.
/// Leaving the band wins over early stopping, which wins over exhaustion.
pub fn stop_check(scores: &[f64], d: usize, policy: &IndividualPolicy) -> Option<StopReason> {
    let p = *scores.last()?;
    if p > policy.alpha_high {
        Some(StopReason::ConfidentHigh)
    } else if p < policy.alpha_low {
        Some(StopReason::ConfidentLow)
    } else if early_stopping(scores, policy.early_stop_eps, policy.early_stop_window) {
        Some(StopReason::EarlyStop)
    } else if scores.len() > d {
        Some(StopReason::Exhausted)
    } else {
        None
    }
}

fn finish(
    acquired: Vec<usize>,
    probabilities: Vec<f64>,
    reason: StopReason,
    t: f64,
) -> InquiryTrace {
    let decision = u8::from(*probabilities.last().expect("non-empty") >= t);
    InquiryTrace {
        acquired,
        probabilities,
        stop_reason: reason,
        decision,
    }
}

/// Runs the inquiry on a precomputed full-length path.
pub fn inquire_along(path: &AcquisitionPath, policy: &IndividualPolicy) -> InquiryTrace {
    let d = path.acquired.len();
    let (k, reason) = stop_index(&path.probabilities, d, policy);
    finish(
        path.acquired[..k].to_vec(),
        path.probabilities[..=k].to_vec(),
        reason,
        policy.threshold,
    )
}

/// Number of acquisitions after which the inquiry stops along `scores`.
pub fn stop_index(scores: &[f64], d: usize, policy: &IndividualPolicy) -> (usize, StopReason) {
    debug_assert_eq!(scores.len(), d + 1);
    for k in 0..=d {
        if let Some(reason) = stop_check(&scores[..=k], d, policy) {
            return (k, reason);
        }
    }
    unreachable!("exhaustion stops at k = d")
}

/// Adaptive inquiry for one individual whose full answers are `row`.
pub fn run_inquiry(
    forest: &Forest,
    strategy: &AcquisitionStrategy,
    row: &[f64],
    policy: &IndividualPolicy,
) -> Result<InquiryTrace, PolicyError> {
    let d = row.len();
    let mut obs = PartialObservation::empty(row);
    let mut path = AcquisitionPath {
        acquired: Vec::new(),
        probabilities: vec![forest.predict_partial(&obs)],
    };
    loop {
        if let Some(reason) = stop_check(&path.probabilities, d, policy) {
            return Ok(finish(
                path.acquired,
                path.probabilities,
                reason,
                policy.threshold,
            ));
        }
        extend(forest, strategy, &mut obs, &mut path)?;
    }
}

/// Inquiries for every row of `data`, in row order.
pub fn run_inquiries(
    forest: &Forest,
    strategy: &AcquisitionStrategy,
    data: &Dataset,
    policy: &IndividualPolicy,
) -> Result<Vec<InquiryTrace>, PolicyError> {
    policy.validate()?;
    (0..data.n_rows())
        .into_par_iter()
        .map(|i| run_inquiry(forest, strategy, data.row(i), policy))
        .collect()
}

/// Full-length acquisition paths for every row, in row order.
pub fn acquisition_paths(
    forest: &Forest,
    strategy: &AcquisitionStrategy,
    data: &Dataset,
    steps: usize,
) -> Result<Vec<AcquisitionPath>, PolicyError> {
    (0..data.n_rows())
        .into_par_iter()
        .map(|i| acquisition_path(forest, strategy, data.row(i), steps))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupClassification {
    pub scores: Vec<f64>,
    pub decisions: Vec<u8>,
    pub budgets: Vec<usize>,
}

/// Scores each row with its group's budget of features chosen by `strategy`.
pub fn classify_group_budget(
    forest: &Forest,
    strategy: &AcquisitionStrategy,
    data: &Dataset,
    policy: &GroupBudgetPolicy,
) -> Result<GroupClassification, PolicyError> {
    let d = data.n_features();
    for b in [policy.budget_a, policy.budget_b] {
        if b > d {
            return Err(PolicyError::BudgetOutOfRange { budget: b, d });
        }
    }
    let budgets: Vec<usize> = data.groups().iter().map(|&g| policy.budget(g)).collect();
    let scores = (0..data.n_rows())
        .into_par_iter()
        .map(|i| {
            let path = acquisition_path(forest, strategy, data.row(i), budgets[i])?;
            Ok(*path.probabilities.last().expect("non-empty"))
        })
        .collect::<Result<Vec<f64>, PolicyError>>()?;
    let decisions = scores
        .iter()
        .map(|&s| u8::from(s >= policy.threshold))
        .collect();
    Ok(GroupClassification {
        scores,
        decisions,
        budgets,
    })
}

/// Arithmetic mean of per-individual budgets. Panics on an empty slice.
pub fn mean_budget(budgets: &[usize]) -> f64 {
    assert!(!budgets.is_empty(), "mean budget of no individuals");
    budgets.iter().sum::<usize>() as f64 / budgets.len() as f64
}

/// Validation outcome of one early-stopping candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsCandidate {
    pub eps: f64,
    pub auc: f64,
    pub mean_budget: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EarlyStopTuning {
    pub eps: f64,
    /// Every grid member, in ascending `eps` order.
    pub candidates: Vec<EpsCandidate>,
}

/// Picks the early-stopping `eps` that maximizes validation AUC among grid
/// members whose mean budget is at most `target_budget`. Ties go to the
/// smaller `eps`; if no member meets the budget, the one with the smallest
/// mean budget wins.
pub fn tune_early_stopping(
    forest: &Forest,
    strategy: &AcquisitionStrategy,
    validation: &Dataset,
    template: &IndividualPolicy,
    target_budget: f64,
    grid: &[f64],
) -> Result<EarlyStopTuning, PolicyError> {
    if grid.is_empty() {
        return Err(PolicyError::EmptyGrid);
    }
    let d = validation.n_features();
    let paths = acquisition_paths(forest, strategy, validation, d)?;
    tune_on_paths(&paths, validation.labels(), template, target_budget, grid)
}

/// [`tune_early_stopping`] on precomputed full-length paths.
pub fn tune_on_paths(
    paths: &[AcquisitionPath],
    labels: &[u8],
    template: &IndividualPolicy,
    target_budget: f64,
    grid: &[f64],
) -> Result<EarlyStopTuning, PolicyError> {
    if grid.is_empty() {
        return Err(PolicyError::EmptyGrid);
    }
    if paths.is_empty() {
        return Err(PolicyError::EmptyValidation);
    }
    let mut grid = grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let mut candidates = Vec::with_capacity(grid.len());
    for &eps in &grid {
        let policy = template.with_early_stop(eps, template.early_stop_window)?;
        let traces: Vec<InquiryTrace> = paths.iter().map(|p| inquire_along(p, &policy)).collect();
        let scores: Vec<f64> = traces.iter().map(InquiryTrace::final_score).collect();
        let budgets: Vec<usize> = traces.iter().map(InquiryTrace::budget).collect();
        let mb = mean_budget(&budgets);
        candidates.push(EpsCandidate {
            eps,
            auc: auc(&scores, labels)?,
            mean_budget: mb,
            feasible: mb <= target_budget,
        });
    }
    let best_feasible = candidates.iter().filter(|c| c.feasible).fold(
        None::<&EpsCandidate>,
        |best, c| match best {
            Some(b) if b.auc >= c.auc => Some(b),
            _ => Some(c),
        },
    );
    let chosen = best_feasible.unwrap_or_else(|| {
        candidates.iter().fold(&candidates[0], |b, c| {
            if c.mean_budget < b.mean_budget {
                c
            } else {
                b
            }
        })
    });
    Ok(EarlyStopTuning {
        eps: chosen.eps,
        candidates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acquisition::CandidateValues;
    use crate::data::ColumnKind;
    use crate::forest::{ForestConfig, Node, Predicate};

    fn policy(lo: f64, hi: f64) -> IndividualPolicy {
        IndividualPolicy::new(lo, hi, 0.5).unwrap()
    }

    /// One tree: feature 1 reveals the label with purity 0.95 / 0.05; feature 0
    /// is unused.
    fn revealing_forest() -> Forest {
        let nodes = vec![
            Node::Split {
                feature: 1,
                predicate: Predicate::LessEq(0.5),
                left: 1,
                right: 2,
                n_train: 40,
                n_positive: 20,
            },
            Node::Leaf {
                n_train: 20,
                n_positive: 1,
            },
            Node::Leaf {
                n_train: 20,
                n_positive: 19,
            },
        ];
        let cfg = ForestConfig {
            n_trees: 1,
            leaf_smoothing: 0.0,
            ..ForestConfig::default()
        };
        Forest::from_trees(vec![nodes], vec![ColumnKind::Numeric; 3], cfg).unwrap()
    }

    #[test]
    fn early_stopping_examples() {
        assert!(early_stopping(&[0.5, 0.5, 0.5], 0.01, 2));
        assert!(!early_stopping(&[0.5, 0.8], 0.01, 1));
        assert!(!early_stopping(&[0.5, 0.5, 0.5], 0.0, 1));
        assert!(!early_stopping(&[0.5], 0.01, 1));
    }

    #[test]
    fn confident_from_the_start() {
        let forest = revealing_forest();
        let strategy = AcquisitionStrategy::by_importance(&forest);
        let trace = run_inquiry(&forest, &strategy, &[0.0, 1.0, 0.0], &policy(0.1, 0.4)).unwrap();
        assert_eq!(trace.stop_reason, StopReason::ConfidentHigh);
        assert_eq!(trace.budget(), 0);
        assert_eq!(trace.decision, 1);
    }

    #[test]
    fn stops_after_revealing_feature() {
        let forest = revealing_forest();
        let halves = CandidateValues {
            values: vec![0.0, 1.0],
            weights: vec![0.5, 0.5],
        };
        let strategies = [
            AcquisitionStrategy::by_importance(&forest),
            AcquisitionStrategy::greedy_with(&forest, vec![halves; 3]),
        ];
        for strategy in strategies {
            let trace =
                run_inquiry(&forest, &strategy, &[0.0, 1.0, 0.0], &policy(0.1, 0.9)).unwrap();
            assert_eq!(trace.acquired, vec![1]);
            assert_eq!(trace.stop_reason, StopReason::ConfidentHigh);
            assert!((trace.final_score() - 0.95).abs() < 1e-12);
        }
    }

    #[test]
    fn unreachable_band_exhausts() {
        let forest = revealing_forest();
        let strategy = AcquisitionStrategy::by_importance(&forest);
        let trace = run_inquiry(
            &forest,
            &strategy,
            &[0.0, 0.7, 0.0],
            &policy(0.0001, 0.9999),
        )
        .unwrap();
        assert_eq!(trace.stop_reason, StopReason::Exhausted);
        assert_eq!(trace.budget(), 3);
        assert_eq!(trace.probabilities.len(), 4);
    }

    #[test]
    fn early_stop_keeps_triggering_feature() {
        let forest = revealing_forest();
        // Rank the unused features first so the score cannot move.
        let strategy = AcquisitionStrategy::static_ranking(vec![0, 2, 1]).unwrap();
        let p = policy(0.01, 0.99).with_early_stop(0.01, 1).unwrap();
        let trace = run_inquiry(&forest, &strategy, &[0.0, 1.0, 0.0], &p).unwrap();
        assert_eq!(trace.stop_reason, StopReason::EarlyStop);
        assert_eq!(trace.acquired, vec![0]);
    }

    #[test]
    fn lazy_and_path_inquiries_agree() {
        let forest = revealing_forest();
        let strategy = AcquisitionStrategy::static_ranking(vec![0, 1, 2]).unwrap();
        let row = [0.0, 0.2, 0.0];
        let path = acquisition_path(&forest, &strategy, &row, 3).unwrap();
        for p in [
            policy(0.1, 0.9),
            policy(0.01, 0.02),
            policy(0.01, 0.99).with_early_stop(0.5, 2).unwrap(),
        ] {
            assert_eq!(
                inquire_along(&path, &p),
                run_inquiry(&forest, &strategy, &row, &p).unwrap()
            );
        }
    }

    #[test]
    fn policy_validation() {
        assert!(IndividualPolicy::new(0.6, 0.4, 0.5).is_err());
        assert!(IndividualPolicy::new(0.0, 0.4, 0.5).is_err());
        assert!(policy(0.2, 0.4).with_early_stop(0.1, 0).is_err());
    }

    #[test]
    fn mean_budget_examples() {
        assert_eq!(mean_budget(&[0, 8]), 4.0);
        assert_eq!(mean_budget(&[0, 0]), 0.0);
        assert_eq!(mean_budget(&[4, 2, 4, 2]), 3.0);
    }

    fn path(probabilities: Vec<f64>) -> AcquisitionPath {
        AcquisitionPath {
            acquired: (0..probabilities.len() - 1).collect(),
            probabilities,
        }
    }

    #[test]
    fn tuning_prefers_feasible_auc_then_smaller_eps() {
        // Row 0 is negative, row 1 positive. Small eps lets both walk to
        // informative scores; large eps stops them at the uninformative start.
        let paths = vec![path(vec![0.5, 0.49, 0.2]), path(vec![0.5, 0.51, 0.8])];
        let labels = [0, 1];
        let t = policy(0.01, 0.99);
        let tuned = tune_on_paths(&paths, &labels, &t, 2.0, &[0.5, 0.001]).unwrap();
        assert_eq!(tuned.eps, 0.001);
        assert_eq!(tuned.candidates[0].auc, 1.0);
        assert_eq!(tuned.candidates[1].mean_budget, 1.0);

        // Same AUC for both -> smaller eps.
        let flat = vec![path(vec![0.3, 0.3, 0.3]), path(vec![0.7, 0.7, 0.7])];
        let tied = tune_on_paths(&flat, &labels, &t, 2.0, &[0.2, 0.1]).unwrap();
        assert_eq!(tied.eps, 0.1);

        // Nothing meets the budget -> cheapest.
        let cheap = tune_on_paths(&paths, &labels, &t, 0.5, &[0.001, 0.5]).unwrap();
        assert_eq!(cheap.eps, 0.5);

        assert_eq!(
            tune_on_paths(&paths, &labels, &t, 1.0, &[0.3]).unwrap().eps,
            0.3
        );
        assert_eq!(
            tune_on_paths(&paths, &labels, &t, 1.0, &[]),
            Err(PolicyError::EmptyGrid)
        );
    }
}
