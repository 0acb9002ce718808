//! Choosing the next feature to acquire.
//!
//! Two strategies:
//! * **static** walks a fixed importance ranking;
//! * **greedy** picks the unacquired feature whose revealed value is expected
//!   to move the current prediction the most, in absolute terms, with the
//!   expectation taken over the feature's training marginal.
//!
//! Forest predictions are piecewise constant in each feature between the
//! forest's split values, so the greedy expectation only needs one
//! representative value per interval between consecutive split values.

use std::fmt;
use std::str::FromStr;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{ColumnKind, Dataset};
use crate::forest::{Forest, PartialObservation};

/// Default cap on candidate values per feature for the greedy expectation.
pub const DEFAULT_MAX_CANDIDATES: usize = 64;

#[derive(Debug, Error, PartialEq)]
pub enum AcquisitionError {
    #[error("all features are already acquired")]
    Exhausted,
    #[error("feature {0} is out of range")]
    OutOfRange(usize),
    #[error("feature {0} is already acquired")]
    AlreadyAcquired(usize),
    #[error("ranking is not a permutation of 0..{0}")]
    BadRanking(usize),
    #[error("greedy selection needs candidate values for {expected} features, got {got}")]
    MissingCandidates { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionMode {
    Static,
    Greedy,
}

impl fmt::Display for SelectionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SelectionMode::Static => "static",
            SelectionMode::Greedy => "greedy",
        })
    }
}

impl FromStr for SelectionMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "static" => Ok(SelectionMode::Static),
            "greedy" => Ok(SelectionMode::Greedy),
            other => Err(format!(
                "unknown selection mode `{other}` (expected static or greedy)"
            )),
        }
    }
}

/// Where greedy selection draws hypothetical feature values from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueSource {
    /// Unconditional empirical distribution of the feature in the training set.
    TrainingMarginal,
}

/// Weighted representative values of one feature.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateValues {
    pub values: Vec<f64>,
    pub weights: Vec<f64>,
}

impl CandidateValues {
    /// Buckets the training column of feature `j` by the forest's split values.
    ///
    /// Numeric features get one representative per non-empty interval
    /// `(t_{k-1}, t_k]`; categorical features one entry per observed code.
    /// When that exceeds `max_candidates`, the training marginal is replaced
    /// by `max_candidates` equally weighted mid-quantiles.
    pub fn from_training(
        forest: &Forest,
        train: &Dataset,
        j: usize,
        max_candidates: usize,
    ) -> Self {
        let mut column: Vec<f64> = (0..train.n_rows()).map(|i| train.value(i, j)).collect();
        column.sort_by(f64::total_cmp);
        let n = column.len() as f64;

        let (values, counts): (Vec<f64>, Vec<usize>) = match forest.feature_kinds()[j] {
            ColumnKind::Categorical => group_equal(&column),
            ColumnKind::Numeric => {
                let cuts = forest.split_values(j);
                let mut values = Vec::new();
                let mut counts = Vec::new();
                let mut start = 0;
                while start < column.len() {
                    // Interval index of this value: first cut >= value.
                    let k = cuts.partition_point(|&t| t < column[start]);
                    let end = match cuts.get(k) {
                        Some(&t) => column.partition_point(|&v| v <= t),
                        None => column.len(),
                    };
                    values.push(column[start]);
                    counts.push(end - start);
                    start = end;
                }
                (values, counts)
            }
        };

        let max_candidates = max_candidates.max(1);
        if values.len() <= max_candidates {
            let weights = counts.iter().map(|&c| c as f64 / n).collect();
            return CandidateValues { values, weights };
        }
        let m = max_candidates;
        let values = (0..m)
            .map(|k| {
                let pos =
                    (((k as f64 + 0.5) * n / m as f64).floor() as usize).min(column.len() - 1);
                column[pos]
            })
            .collect();
        CandidateValues {
            values,
            weights: vec![1.0 / m as f64; m],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn group_equal(sorted: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut values: Vec<f64> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    for &v in sorted {
        if values.last() == Some(&v) {
            *counts.last_mut().unwrap() += 1;
        } else {
            values.push(v);
            counts.push(1);
        }
    }
    (values, counts)
}

/// A feature-acquisition strategy bound to one forest.
#[derive(Debug, Clone, PartialEq)]
pub struct AcquisitionStrategy {
    mode: SelectionMode,
    ranking: Vec<usize>,
    value_source: ValueSource,
    max_candidates: usize,
    candidates: Vec<CandidateValues>,
}

impl AcquisitionStrategy {
    /// Static selection along `ranking`, which must be a permutation of `0..d`.
    pub fn static_ranking(ranking: Vec<usize>) -> Result<Self, AcquisitionError> {
        check_permutation(&ranking)?;
        Ok(AcquisitionStrategy {
            mode: SelectionMode::Static,
            ranking,
            value_source: ValueSource::TrainingMarginal,
            max_candidates: DEFAULT_MAX_CANDIDATES,
            candidates: Vec::new(),
        })
    }

    /// Static selection by the forest's importance ranking.
    pub fn by_importance(forest: &Forest) -> Self {
        Self::static_ranking(forest.feature_importance())
            .expect("importance ranking is a permutation")
    }

    /// Greedy selection with candidate values from the training marginals.
    pub fn greedy(forest: &Forest, train: &Dataset, max_candidates: usize) -> Self {
        let candidates = (0..forest.n_features())
            .map(|j| CandidateValues::from_training(forest, train, j, max_candidates))
            .collect();
        AcquisitionStrategy {
            mode: SelectionMode::Greedy,
            ranking: forest.feature_importance(),
            value_source: ValueSource::TrainingMarginal,
            max_candidates,
            candidates,
        }
    }

    /// Greedy selection over caller-supplied candidate values, one entry per
    /// feature.
    pub fn greedy_with(forest: &Forest, candidates: Vec<CandidateValues>) -> Self {
        AcquisitionStrategy {
            mode: SelectionMode::Greedy,
            ranking: forest.feature_importance(),
            value_source: ValueSource::TrainingMarginal,
            max_candidates: candidates
                .iter()
                .map(CandidateValues::len)
                .max()
                .unwrap_or(0),
            candidates,
        }
    }

    /// Builds the strategy for `mode` from a trained forest and its training data.
    pub fn for_mode(mode: SelectionMode, forest: &Forest, train: &Dataset) -> Self {
        match mode {
            SelectionMode::Static => Self::by_importance(forest),
            SelectionMode::Greedy => Self::greedy(forest, train, DEFAULT_MAX_CANDIDATES),
        }
    }

    pub fn mode(&self) -> SelectionMode {
        self.mode
    }

    pub fn ranking(&self) -> &[usize] {
        &self.ranking
    }

    pub fn value_source(&self) -> ValueSource {
        self.value_source
    }

    pub fn max_candidates(&self) -> usize {
        self.max_candidates
    }

    pub fn candidates(&self) -> &[CandidateValues] {
        &self.candidates
    }

    pub fn next_feature(
        &self,
        forest: &Forest,
        obs: &PartialObservation,
    ) -> Result<usize, AcquisitionError> {
        match self.mode {
            SelectionMode::Static => next_feature_static(&self.ranking, obs.mask()),
            SelectionMode::Greedy => next_feature_greedy(forest, obs, &self.candidates),
        }
    }
}

fn check_permutation(ranking: &[usize]) -> Result<(), AcquisitionError> {
    let d = ranking.len();
    let mut seen = vec![false; d];
    for &j in ranking {
        if j >= d || std::mem::replace(&mut seen[j], true) {
            return Err(AcquisitionError::BadRanking(d));
        }
    }
    Ok(())
}

/// Highest-ranked feature not yet acquired.
pub fn next_feature_static(
    ranking: &[usize],
    acquired: &FixedBitSet,
) -> Result<usize, AcquisitionError> {
    ranking
        .iter()
        .copied()
        .find(|&j| !acquired.contains(j))
        .ok_or(AcquisitionError::Exhausted)
}

/// Expected absolute change of the forest score if feature `j` were revealed,
/// over the candidate values of `j`.
pub fn expected_change(
    forest: &Forest,
    obs: &PartialObservation,
    j: usize,
    candidates: &CandidateValues,
) -> Result<f64, AcquisitionError> {
    if j >= obs.n_features() {
        return Err(AcquisitionError::OutOfRange(j));
    }
    if obs.is_acquired(j) {
        return Err(AcquisitionError::AlreadyAcquired(j));
    }
    if !forest.uses_feature(j) {
        return Ok(0.0);
    }
    let current = forest.predict_partial(obs);
    Ok(expected_change_from(forest, obs, j, candidates, current))
}

fn expected_change_from(
    forest: &Forest,
    obs: &PartialObservation,
    j: usize,
    candidates: &CandidateValues,
    current: f64,
) -> f64 {
    candidates
        .values
        .iter()
        .zip(&candidates.weights)
        .map(|(&v, &w)| w * (forest.predict_partial(&obs.with_hypothetical(j, v)) - current).abs())
        .sum()
}

/// Unacquired feature with the largest expected change; ties go to the
/// lowest index.
pub fn next_feature_greedy(
    forest: &Forest,
    obs: &PartialObservation,
    candidates: &[CandidateValues],
) -> Result<usize, AcquisitionError> {
    let d = obs.n_features();
    if candidates.len() != d {
        return Err(AcquisitionError::MissingCandidates {
            expected: d,
            got: candidates.len(),
        });
    }
    let current = forest.predict_partial(obs);
    let mut best: Option<(usize, f64)> = None;
    for j in (0..d).filter(|&j| !obs.is_acquired(j)) {
        let score = if forest.uses_feature(j) {
            expected_change_from(forest, obs, j, &candidates[j], current)
        } else {
            0.0
        };
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((j, score));
        }
    }
    best.map(|(j, _)| j).ok_or(AcquisitionError::Exhausted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::{ForestConfig, Node, Predicate};

    fn bits(d: usize, set: &[usize]) -> FixedBitSet {
        let mut b = FixedBitSet::with_capacity(d);
        set.iter().for_each(|&j| b.insert(j));
        b
    }

    #[test]
    fn static_follows_ranking() {
        let r = [2, 0, 1];
        assert_eq!(next_feature_static(&r, &bits(3, &[2])), Ok(0));
        assert_eq!(next_feature_static(&r, &bits(3, &[])), Ok(2));
        assert_eq!(
            next_feature_static(&[0], &bits(1, &[0])),
            Err(AcquisitionError::Exhausted)
        );
    }

    #[test]
    fn ranking_must_be_permutation() {
        assert!(AcquisitionStrategy::static_ranking(vec![0, 0]).is_err());
        assert!(AcquisitionStrategy::static_ranking(vec![0, 2]).is_err());
        assert!(AcquisitionStrategy::static_ranking(vec![1, 0]).is_ok());
    }

    fn one_split_forest(d: usize, feature: usize) -> Forest {
        let tree = vec![
            Node::Split {
                feature,
                predicate: Predicate::LessEq(0.5),
                left: 1,
                right: 2,
                n_train: 10,
                n_positive: 5,
            },
            Node::Leaf {
                n_train: 5,
                n_positive: 1,
            },
            Node::Leaf {
                n_train: 5,
                n_positive: 4,
            },
        ];
        let cfg = ForestConfig {
            n_trees: 1,
            leaf_smoothing: 0.0,
            ..ForestConfig::default()
        };
        Forest::from_trees(vec![tree], vec![ColumnKind::Numeric; d], cfg).unwrap()
    }

    #[test]
    fn expected_change_on_single_split() {
        // Leaves 0.2 / 0.8, empty-mask score 0.5, balanced halves.
        let forest = one_split_forest(2, 0);
        let cands = CandidateValues {
            values: vec![0.0, 1.0],
            weights: vec![0.5, 0.5],
        };
        let obs = PartialObservation::empty(&[0.0, 0.0]);
        let e = expected_change(&forest, &obs, 0, &cands).unwrap();
        assert!((e - 0.3).abs() < 1e-12);
        assert_eq!(expected_change(&forest, &obs, 1, &cands), Ok(0.0));
        assert_eq!(
            expected_change(&forest, &obs, 2, &cands),
            Err(AcquisitionError::OutOfRange(2))
        );
        let acq = PartialObservation::with_features(&[0.0, 0.0], [0]);
        assert_eq!(
            expected_change(&forest, &acq, 0, &cands),
            Err(AcquisitionError::AlreadyAcquired(0))
        );
    }

    #[test]
    fn greedy_prefers_used_feature_then_lowest_index() {
        let cands = vec![
            CandidateValues {
                values: vec![0.0, 1.0],
                weights: vec![0.5, 0.5],
            },
            CandidateValues {
                values: vec![0.0, 1.0],
                weights: vec![0.5, 0.5],
            },
            CandidateValues {
                values: vec![0.0, 1.0],
                weights: vec![0.5, 0.5],
            },
        ];
        let forest = one_split_forest(3, 1);
        let obs = PartialObservation::empty(&[0.0; 3]);
        assert_eq!(next_feature_greedy(&forest, &obs, &cands), Ok(1));
        let obs = PartialObservation::with_features(&[0.0; 3], [1]);
        assert_eq!(next_feature_greedy(&forest, &obs, &cands), Ok(0));
        let full = PartialObservation::full(&[0.0; 3]);
        assert_eq!(
            next_feature_greedy(&forest, &full, &cands),
            Err(AcquisitionError::Exhausted)
        );
    }

    #[test]
    fn candidates_bucket_by_split_values() {
        let forest = one_split_forest(1, 0);
        let rows: Vec<Vec<f64>> = [0.1, 0.2, 0.3, 0.7, 0.9, 1.1, 1.3, 0.5]
            .iter()
            .map(|&v| vec![v])
            .collect();
        let labels = [0, 1, 0, 1, 0, 1, 0, 1];
        let ds = crate::testutil::numeric_dataset(&rows, &labels);
        let c = CandidateValues::from_training(&forest, &ds, 0, 64);
        assert_eq!(c.values, vec![0.1, 0.7]);
        assert_eq!(c.weights, vec![0.5, 0.5]);
        let capped = CandidateValues::from_training(&forest, &ds, 0, 1);
        assert_eq!(capped.len(), 1);
    }

    #[test]
    fn selection_mode_parses() {
        assert_eq!("greedy".parse::<SelectionMode>(), Ok(SelectionMode::Greedy));
        assert!("other".parse::<SelectionMode>().is_err());
    }
}
