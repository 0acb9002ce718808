//! Parameter sweeps over the three classifier families, equal-odds filtering,
//! dominance comparisons and report files.
//!
//! A sweep evaluates every grid design on the test split. Each individual's
//! full acquisition path is computed once ([`SweepContext`]); group-budget
//! designs read scores off the path at their budget, individual designs apply
//! the inquiry stopping rule to it, and randomized designs mix full-path
//! scores with group base rates.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acquisition::{AcquisitionStrategy, SelectionMode, DEFAULT_MAX_CANDIDATES};
use crate::baselines::{randomize_calibrated, randomized_budget, RandomizedDesign, WeightedScores};
use crate::data::{split_indices, DataError, Dataset, Group, GroupSel, Split};
use crate::forest::{train, Forest, ForestConfig, ForestError};
use crate::metrics::{
    calibration_line_deviation, class_counts, generalized_rates, generalized_rates_weighted,
    pareto_front, rates_weighted, threshold_rates, weakly_dominates, Design, GroupPoint,
    GroupRates, MetricsError, OperatingPoint,
};
use crate::policy::{
    acquisition_paths, classify_group_budget, inquire_along, mean_budget, run_inquiries,
    tune_early_stopping, AcquisitionPath, EarlyStopTuning, GroupBudgetPolicy, IndividualPolicy,
    PolicyError,
};
use crate::seed::{derive_seed, SPLIT, TRAIN, VALIDATION};

/// Slack on budget comparisons, which are ratios of integers.
const BUDGET_SLACK: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Forest(#[from] ForestError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("invalid sweep configuration: {0}")]
    InvalidConfig(String),
    #[error("{0} is empty")]
    EmptySet(&'static str),
    #[error("no randomized design reaches the requested parity: {0}")]
    NoRandomizedParity(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    }
}

// ---------------------------------------------------------------------------
// Experiment setup

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Training share of the train/test split.
    pub split_fraction: f64,
    /// Share of the training split held out to tune early stopping.
    pub validation_fraction: f64,
    pub forest: ForestConfig,
    pub selection: SelectionMode,
    pub max_candidates: usize,
    /// Top-level seed; split, validation and forest seeds derive from it.
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            split_fraction: 0.8,
            validation_fraction: 0.1,
            forest: ForestConfig::default(),
            selection: SelectionMode::Static,
            max_candidates: DEFAULT_MAX_CANDIDATES,
            seed: 0,
        }
    }
}

/// Data partitions and the fitted model of one run.
#[derive(Debug, Clone)]
pub struct Experiment {
    /// Whole dataset, with groups recomputed from the training split.
    pub dataset: Dataset,
    pub split: Split,
    /// Training rows the forest was fitted on.
    pub fit: Dataset,
    pub validation: Dataset,
    pub test: Dataset,
    pub forest: Forest,
    pub strategy: AcquisitionStrategy,
    /// Per-group base rates of the fitted rows, `[A, B]`.
    pub train_base_rates: [f64; 2],
}

/// Splits, regroups on the training split, carves out validation rows and
/// trains the forest.
pub fn prepare_experiment(
    data: &Dataset,
    config: &ExperimentConfig,
) -> Result<Experiment, ExperimentError> {
    prepare_with_forest(data, config, None)
}

/// Like [`prepare_experiment`], but reuses `forest` when given. A supplied
/// forest must have been trained by the same configuration and seed.
pub fn prepare_with_forest(
    data: &Dataset,
    config: &ExperimentConfig,
    forest: Option<Forest>,
) -> Result<Experiment, ExperimentError> {
    if !(config.validation_fraction > 0.0 && config.validation_fraction < 1.0) {
        return Err(ExperimentError::InvalidConfig(format!(
            "validation_fraction {} outside (0, 1)",
            config.validation_fraction
        )));
    }
    let split = split_indices(
        data.n_rows(),
        config.split_fraction,
        derive_seed(config.seed, SPLIT),
    )?;
    let dataset = data.regroup_from_rows(&split.train)?;
    let carve = split_indices(
        split.train.len(),
        1.0 - config.validation_fraction,
        derive_seed(config.seed, VALIDATION),
    )?;
    let fit_rows: Vec<usize> = carve.train.iter().map(|&k| split.train[k]).collect();
    let val_rows: Vec<usize> = carve.test.iter().map(|&k| split.train[k]).collect();
    let fit = dataset.subset(&fit_rows)?;
    let validation = dataset.subset(&val_rows)?;
    let test = dataset.subset(&split.test)?;

    let forest_config = ForestConfig {
        seed: derive_seed(config.seed, TRAIN),
        ..config.forest.clone()
    };
    let forest = match forest {
        None => train(&fit, &forest_config)?,
        Some(f) => {
            if f.config() != &forest_config || f.n_features() != fit.n_features() {
                return Err(ExperimentError::InvalidConfig(format!(
                    "forest was trained with {:?} on {} features, expected {:?} on {}",
                    f.config(),
                    f.n_features(),
                    forest_config,
                    fit.n_features()
                )));
            }
            f
        }
    };
    let strategy = match config.selection {
        SelectionMode::Static => AcquisitionStrategy::by_importance(&forest),
        SelectionMode::Greedy => AcquisitionStrategy::greedy(&forest, &fit, config.max_candidates),
    };
    let train_base_rates = [
        fit.base_rate(GroupSel::Only(Group::A))?,
        fit.base_rate(GroupSel::Only(Group::B))?,
    ];
    Ok(Experiment {
        dataset,
        split,
        fit,
        validation,
        test,
        forest,
        strategy,
        train_base_rates,
    })
}

/// Early-stopping candidates tried by [`tune_early_stop`].
pub const EPS_GRID: [f64; 7] = [0.0, 0.001, 0.0025, 0.005, 0.01, 0.02, 0.05];

/// Tunes early stopping on the validation rows for mean budget `b_max`, with
/// the widest confidence band of the default lattice and threshold 0.5.
pub fn tune_early_stop(
    exp: &Experiment,
    b_max: f64,
    window: usize,
) -> Result<EarlyStopTuning, ExperimentError> {
    let template = IndividualPolicy::new(0.02, 0.98, 0.5)?.with_early_stop(0.0, window)?;
    Ok(tune_early_stopping(
        &exp.forest,
        &exp.strategy,
        &exp.validation,
        &template,
        b_max,
        &EPS_GRID,
    )?)
}

// ---------------------------------------------------------------------------
// Sweep configuration

/// `{0.02, 0.04, ..., 0.98}`.
pub fn default_thresholds() -> Vec<f64> {
    (1..50).map(|k| k as f64 / 50.0).collect()
}

/// `{0, 1, ..., d}`, or 30 evenly spaced budgets when `d > 30`.
pub fn default_budgets(d: usize) -> Vec<usize> {
    if d <= 30 {
        return (0..=d).collect();
    }
    let mut b: Vec<usize> = (0..30)
        .map(|k| (k as f64 * d as f64 / 29.0).round() as usize)
        .collect();
    b.dedup();
    b
}

/// All pairs `lo < hi` drawn from `lattice`.
pub fn alpha_pairs(lattice: &[f64]) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for (i, &lo) in lattice.iter().enumerate() {
        for &hi in &lattice[i + 1..] {
            if lo < hi {
                out.push((lo, hi));
            }
        }
    }
    out
}

/// `{0, 0.05, ..., 1}`.
pub fn default_fractions() -> Vec<f64> {
    (0..=20).map(|k| k as f64 / 20.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub thresholds: Vec<f64>,
    /// Budgets tried for each group (the group sweep uses every pair).
    pub budgets: Vec<usize>,
    pub alphas: Vec<(f64, f64)>,
    /// Randomization fractions tried for each group.
    pub fractions: Vec<f64>,
    pub tolerance: f64,
    pub b_max: f64,
    pub early_stop_eps: f64,
    pub early_stop_window: usize,
}

impl SweepConfig {
    pub fn defaults(d: usize) -> Self {
        let thresholds = default_thresholds();
        SweepConfig {
            alphas: alpha_pairs(&thresholds),
            thresholds,
            budgets: default_budgets(d),
            fractions: default_fractions(),
            tolerance: crate::metrics::DEFAULT_TOLERANCE,
            b_max: d as f64 / 2.0,
            early_stop_eps: 0.0,
            early_stop_window: 1,
        }
    }

    pub fn validate(&self, d: usize) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::InvalidConfig(m));
        if self.thresholds.is_empty()
            || self.budgets.is_empty()
            || self.alphas.is_empty()
            || self.fractions.is_empty()
        {
            return bad("every grid must be non-empty".into());
        }
        if let Some(t) = self.thresholds.iter().find(|t| !(0.0..=1.0).contains(*t)) {
            return bad(format!("threshold {t} outside [0, 1]"));
        }
        if let Some(b) = self.budgets.iter().find(|&&b| b > d) {
            return bad(format!("budget {b} exceeds d = {d}"));
        }
        if let Some(f) = self.fractions.iter().find(|f| !(0.0..=1.0).contains(*f)) {
            return bad(format!("fraction {f} outside [0, 1]"));
        }
        for &(lo, hi) in &self.alphas {
            IndividualPolicy::new(lo, hi, 0.5)
                .map_err(|e| ExperimentError::InvalidConfig(e.to_string()))?;
        }
        if !(self.b_max > 0.0 && self.b_max <= d as f64) {
            return bad(format!("b_max {} outside (0, {d}]", self.b_max));
        }
        if self.tolerance.is_nan() || self.tolerance < 0.0 {
            return bad(format!("tolerance {} must be >= 0", self.tolerance));
        }
        Ok(())
    }

    fn individual_policy(&self, lo: f64, hi: f64, t: f64) -> Result<IndividualPolicy, PolicyError> {
        IndividualPolicy::new(lo, hi, t)?
            .with_early_stop(self.early_stop_eps, self.early_stop_window)
    }
}

// ---------------------------------------------------------------------------
// Sweeps

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Group,
    Individual,
    Randomized,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Group, Family::Individual, Family::Randomized];

    pub fn name(self) -> &'static str {
        match self {
            Family::Group => "group",
            Family::Individual => "individual",
            Family::Randomized => "randomized",
        }
    }
}

impl std::str::FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "group" => Ok(Family::Group),
            "individual" => Ok(Family::Individual),
            "randomized" => Ok(Family::Randomized),
            other => Err(format!("unknown family `{other}`")),
        }
    }
}

/// Operating points of one family on one labelled set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionResult {
    pub family: Family,
    /// Base rates of the evaluation set, `[A, B]`, for calibration diagnostics.
    pub base_rates: [f64; 2],
    pub points: Vec<OperatingPoint>,
}

/// Test data with every individual's full acquisition path.
#[derive(Debug, Clone)]
pub struct SweepContext<'a> {
    pub test: &'a Dataset,
    pub paths: Vec<AcquisitionPath>,
    /// Scores randomized individuals receive, `[A, B]`.
    pub randomization_rates: [f64; 2],
    counts: [[usize; 2]; 2],
}

impl<'a> SweepContext<'a> {
    pub fn new(
        forest: &Forest,
        strategy: &AcquisitionStrategy,
        test: &'a Dataset,
        randomization_rates: [f64; 2],
    ) -> Result<Self, ExperimentError> {
        let paths = acquisition_paths(forest, strategy, test, test.n_features())?;
        Ok(SweepContext {
            test,
            paths,
            randomization_rates,
            counts: class_counts(test.labels(), test.groups()),
        })
    }

    pub fn for_experiment(exp: &'a Experiment) -> Result<Self, ExperimentError> {
        Self::new(&exp.forest, &exp.strategy, &exp.test, exp.train_base_rates)
    }

    pub fn d(&self) -> usize {
        self.test.n_features()
    }

    /// Scores after `b` acquisitions, per row.
    pub fn scores_at(&self, b: usize) -> Vec<f64> {
        self.paths.iter().map(|p| p.probabilities[b]).collect()
    }

    pub fn full_scores(&self) -> Vec<f64> {
        self.scores_at(self.d())
    }

    fn base_rates(&self) -> [f64; 2] {
        let rate = |c: [usize; 2]| c[1] as f64 / (c[0] + c[1]) as f64;
        [rate(self.counts[0]), rate(self.counts[1])]
    }

    fn point(
        &self,
        design: Design,
        a: GroupPoint,
        b: GroupPoint,
        mean_budget: f64,
    ) -> OperatingPoint {
        OperatingPoint {
            design,
            a,
            b,
            mean_budget,
            n_a: self.counts[0][0] + self.counts[0][1],
            n_b: self.counts[1][0] + self.counts[1][1],
            class_counts: self.counts,
        }
    }

    fn region(&self, family: Family, mut points: Vec<OperatingPoint>) -> RegionResult {
        points.sort_by(|p, q| {
            design_key(&p.design)
                .partial_cmp(&design_key(&q.design))
                .expect("finite")
        });
        RegionResult {
            family,
            base_rates: self.base_rates(),
            points,
        }
    }

    /// Per-threshold group points of equally weighted scores.
    fn evaluate(
        &self,
        scores: &[f64],
        thresholds: &[f64],
    ) -> Result<Vec<[GroupPoint; 2]>, ExperimentError> {
        let ones = vec![1.0; scores.len()];
        self.evaluate_weighted(
            scores,
            &ones,
            self.test.labels(),
            self.test.groups(),
            thresholds,
        )
    }

    fn evaluate_weighted(
        &self,
        scores: &[f64],
        weights: &[f64],
        labels: &[u8],
        groups: &[Group],
        thresholds: &[f64],
    ) -> Result<Vec<[GroupPoint; 2]>, ExperimentError> {
        let generalized = generalized_rates_weighted(scores, weights, labels, groups)?;
        thresholds
            .iter()
            .map(|&t| {
                let r = threshold_rates(scores, weights, labels, groups, t)?;
                Ok([
                    GroupPoint::from_rates(&r.a, &generalized.a),
                    GroupPoint::from_rates(&r.b, &generalized.b),
                ])
            })
            .collect()
    }
}

fn design_key(d: &Design) -> [f64; 5] {
    match *d {
        Design::Group {
            budget_a,
            budget_b,
            threshold,
        } => [0.0, budget_a as f64, budget_b as f64, threshold, 0.0],
        Design::Individual {
            alpha_low,
            alpha_high,
            threshold,
            early_stop_eps,
        } => [1.0, alpha_low, alpha_high, threshold, early_stop_eps],
        Design::Randomized {
            fraction_a,
            fraction_b,
            threshold,
        } => [2.0, fraction_a, fraction_b, threshold, 0.0],
    }
}

/// One point per `(b_A, b_B, t)`.
pub fn sweep_group_budgets(
    ctx: &SweepContext,
    config: &SweepConfig,
) -> Result<RegionResult, ExperimentError> {
    config.validate(ctx.d())?;
    // table[b][t] = [A, B]: a group's rates depend only on its own budget.
    let table = config
        .budgets
        .par_iter()
        .map(|&b| ctx.evaluate(&ctx.scores_at(b), &config.thresholds))
        .collect::<Result<Vec<_>, _>>()?;
    let n = ctx.test.n_rows() as f64;
    let (n_a, n_b) = (
        ctx.test.group_size(Group::A) as f64,
        ctx.test.group_size(Group::B) as f64,
    );
    let mut points = Vec::new();
    for (ia, &ba) in config.budgets.iter().enumerate() {
        for (ib, &bb) in config.budgets.iter().enumerate() {
            let mb = (n_a * ba as f64 + n_b * bb as f64) / n;
            for (it, &t) in config.thresholds.iter().enumerate() {
                let design = Design::Group {
                    budget_a: ba,
                    budget_b: bb,
                    threshold: t,
                };
                points.push(ctx.point(design, table[ia][it][0], table[ib][it][1], mb));
            }
        }
    }
    Ok(ctx.region(Family::Group, points))
}

/// One point per `(alpha_low, alpha_high, t)` at the configured early stopping.
pub fn sweep_individual(
    ctx: &SweepContext,
    config: &SweepConfig,
) -> Result<RegionResult, ExperimentError> {
    config.validate(ctx.d())?;
    let per_alpha = config
        .alphas
        .par_iter()
        .map(|&(lo, hi)| {
            let policy = config.individual_policy(lo, hi, 0.5)?;
            let traces: Vec<_> = ctx
                .paths
                .iter()
                .map(|p| inquire_along(p, &policy))
                .collect();
            let scores: Vec<f64> = traces.iter().map(|t| t.final_score()).collect();
            let budgets: Vec<usize> = traces.iter().map(|t| t.budget()).collect();
            let evaluated = ctx.evaluate(&scores, &config.thresholds)?;
            let mb = mean_budget(&budgets);
            Ok(config
                .thresholds
                .iter()
                .zip(evaluated)
                .map(|(&t, [a, b])| {
                    let design = Design::Individual {
                        alpha_low: lo,
                        alpha_high: hi,
                        threshold: t,
                        early_stop_eps: config.early_stop_eps,
                    };
                    ctx.point(design, a, b, mb)
                })
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    Ok(ctx.region(
        Family::Individual,
        per_alpha.into_iter().flatten().collect(),
    ))
}

fn randomized_entries(
    ctx: &SweepContext,
    design: &RandomizedDesign,
) -> (WeightedScores, Vec<u8>, Vec<Group>) {
    let ws = randomize_calibrated(
        &ctx.full_scores(),
        ctx.test.groups(),
        ctx.randomization_rates,
        design,
    );
    let labels = ws.gather(ctx.test.labels());
    let groups = ws.gather(ctx.test.groups());
    (ws, labels, groups)
}

/// One point per `(f, t)`: at each threshold the group with the lower
/// full-information FPR + FNR has a fraction `f` of its members randomized.
/// Evaluated by expectation over the coin flips.
pub fn sweep_randomized(
    ctx: &SweepContext,
    config: &SweepConfig,
) -> Result<RegionResult, ExperimentError> {
    config.validate(ctx.d())?;
    let full = ctx.evaluate(&ctx.full_scores(), &config.thresholds)?;
    // table[f][t] = [A, B], from designs randomizing both groups at f; a
    // group's rates depend only on its own fraction.
    let table = config
        .fractions
        .par_iter()
        .map(|&f| {
            let (ws, labels, groups) =
                randomized_entries(ctx, &RandomizedDesign::derandomized(f, f, 0.5));
            ctx.evaluate_weighted(
                &ws.scores,
                &ws.weights,
                &labels,
                &groups,
                &config.thresholds,
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    let (n_a, n_b) = (ctx.test.group_size(Group::A), ctx.test.group_size(Group::B));
    let mut points = Vec::new();
    for (it, &t) in config.thresholds.iter().enumerate() {
        let [a, b] = full[it];
        let adv = if a.fpr + a.fnr <= b.fpr + b.fnr {
            Group::A
        } else {
            Group::B
        };
        for (i, &f) in config.fractions.iter().enumerate() {
            let (fa, fb) = if adv == Group::A { (f, 0.0) } else { (0.0, f) };
            let mut pair = full[it];
            pair[adv as usize] = table[i][it][adv as usize];
            let mb = randomized_budget(
                &RandomizedDesign::derandomized(fa, fb, t),
                ctx.d(),
                n_a,
                n_b,
            );
            let design = Design::Randomized {
                fraction_a: fa,
                fraction_b: fb,
                threshold: t,
            };
            points.push(ctx.point(design, pair[0], pair[1], mb));
        }
    }
    Ok(ctx.region(Family::Randomized, points))
}

/// Re-evaluates a single design from scratch with the policy-level API
/// (lazy inquiries, per-row budgets, explicit randomization).
pub fn evaluate_design(
    forest: &Forest,
    strategy: &AcquisitionStrategy,
    test: &Dataset,
    randomization_rates: [f64; 2],
    design: &Design,
    early_stop_window: usize,
) -> Result<OperatingPoint, ExperimentError> {
    let labels = test.labels();
    let groups = test.groups();
    let counts = class_counts(labels, groups);
    let to_points = |r: GroupRates, g: GroupRates| {
        [
            GroupPoint::from_rates(&r.a, &g.a),
            GroupPoint::from_rates(&r.b, &g.b),
        ]
    };
    let (pts, mb) = match *design {
        Design::Group {
            budget_a,
            budget_b,
            threshold,
        } => {
            let policy = GroupBudgetPolicy {
                budget_a,
                budget_b,
                threshold,
            };
            let c = classify_group_budget(forest, strategy, test, &policy)?;
            let dec: Vec<f64> = c.decisions.iter().map(|&v| f64::from(v)).collect();
            let r = rates_weighted(&dec, &vec![1.0; dec.len()], labels, groups)?;
            (
                to_points(r, generalized_rates(&c.scores, labels, groups)?),
                mean_budget(&c.budgets),
            )
        }
        Design::Individual {
            alpha_low,
            alpha_high,
            threshold,
            early_stop_eps,
        } => {
            let policy = IndividualPolicy::new(alpha_low, alpha_high, threshold)?
                .with_early_stop(early_stop_eps, early_stop_window)?;
            let traces = run_inquiries(forest, strategy, test, &policy)?;
            let scores: Vec<f64> = traces.iter().map(|t| t.final_score()).collect();
            let dec: Vec<f64> = traces.iter().map(|t| f64::from(t.decision)).collect();
            let budgets: Vec<usize> = traces.iter().map(|t| t.budget()).collect();
            let r = rates_weighted(&dec, &vec![1.0; dec.len()], labels, groups)?;
            (
                to_points(r, generalized_rates(&scores, labels, groups)?),
                mean_budget(&budgets),
            )
        }
        Design::Randomized {
            fraction_a,
            fraction_b,
            threshold,
        } => {
            let full: Vec<f64> = (0..test.n_rows())
                .map(|i| forest.predict_full(test.row(i)))
                .collect();
            let rd = RandomizedDesign::derandomized(fraction_a, fraction_b, threshold);
            let ws = randomize_calibrated(&full, groups, randomization_rates, &rd);
            let (wl, wg) = (ws.gather(labels), ws.gather(groups));
            let r = threshold_rates(&ws.scores, &ws.weights, &wl, &wg, threshold)?;
            let g = generalized_rates_weighted(&ws.scores, &ws.weights, &wl, &wg)?;
            let mb = randomized_budget(
                &rd,
                test.n_features(),
                test.group_size(Group::A),
                test.group_size(Group::B),
            );
            (to_points(r, g), mb)
        }
    };
    Ok(OperatingPoint {
        design: *design,
        a: pts[0],
        b: pts[1],
        mean_budget: mb,
        n_a: counts[0][0] + counts[0][1],
        n_b: counts[1][0] + counts[1][1],
        class_counts: counts,
    })
}

// ---------------------------------------------------------------------------
// Filtering and comparisons

/// An equal-odds design with its pooled rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub point: OperatingPoint,
    pub pooled_fpr: f64,
    pub pooled_fnr: f64,
}

impl Solution {
    pub fn coords(&self) -> [f64; 2] {
        [self.pooled_fpr, self.pooled_fnr]
    }
}

/// Points with `D_FPR <= tolerance`, `D_FNR <= tolerance` and mean budget at
/// most `b_max`.
pub fn filter_equal_odds(points: &[OperatingPoint], tolerance: f64, b_max: f64) -> Vec<Solution> {
    points
        .iter()
        .filter(|p| {
            (p.a.fpr - p.b.fpr).abs() <= tolerance
                && (p.a.fnr - p.b.fnr).abs() <= tolerance
                && p.mean_budget <= b_max + BUDGET_SLACK
        })
        .map(|p| {
            let (pooled_fpr, pooled_fnr) = p.pooled();
            Solution {
                point: *p,
                pooled_fpr,
                pooled_fnr,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierCheck {
    pub coords: Vec<f64>,
    /// Index into the first set of a point that weakly dominates this one.
    pub dominated_by: Option<usize>,
}

/// For each Pareto-frontier point of `second`, whether some point of `first`
/// is no worse in every coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceReport {
    pub frontier: Vec<FrontierCheck>,
    pub dominated: usize,
    pub total: usize,
    pub fraction: f64,
}

pub fn dominance_report<const N: usize>(
    first: &[[f64; N]],
    second: &[[f64; N]],
) -> Result<DominanceReport, ExperimentError> {
    if first.is_empty() {
        return Err(ExperimentError::EmptySet("first point set"));
    }
    if second.is_empty() {
        return Err(ExperimentError::EmptySet("second point set"));
    }
    let frontier: Vec<FrontierCheck> = pareto_front(second)
        .into_iter()
        .map(|i| FrontierCheck {
            coords: second[i].to_vec(),
            dominated_by: first.iter().position(|p| weakly_dominates(p, &second[i])),
        })
        .collect();
    let dominated = frontier.iter().filter(|c| c.dominated_by.is_some()).count();
    let total = frontier.len();
    Ok(DominanceReport {
        frontier,
        dominated,
        total,
        fraction: dominated as f64 / total as f64,
    })
}

/// Group-budget designs against the randomized design that reaches
/// generalized-FNR parity, compared at the randomized design's budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EqualOpportunityComparison {
    pub randomized: OperatingPoint,
    pub budget_cap: f64,
    /// Group-budget points within tolerance on GFNR and within the budget cap.
    pub group_solutions: Vec<OperatingPoint>,
    /// Dominance in `[GFPR_A, GFNR_A, GFPR_B, GFNR_B]`.
    pub report: DominanceReport,
}

/// Randomizes the group with the lower full-information GFNR by the smallest
/// fraction that equalizes GFNR, then compares group-budget designs with at
/// most that mean budget and GFNR disparity within `tolerance`.
pub fn equal_opportunity_comparison(
    ctx: &SweepContext,
    group: &RegionResult,
    tolerance: f64,
) -> Result<EqualOpportunityComparison, ExperimentError> {
    let full = generalized_rates(&ctx.full_scores(), ctx.test.labels(), ctx.test.groups())?;
    let adv = if full.a.fnr <= full.b.fnr {
        Group::A
    } else {
        Group::B
    };
    let (p, q) = (full.get(adv), full.get(adv.other()));
    let mu = ctx.randomization_rates[adv as usize];
    // GFNR moves linearly from p.fnr (f = 0) to 1 - mu (f = 1).
    let span = (1.0 - mu) - p.fnr;
    if span <= q.fnr - p.fnr || span <= 0.0 {
        return Err(ExperimentError::NoRandomizedParity(format!(
            "group {adv} GFNR {:.4} cannot reach {:.4} by randomizing toward base rate {mu:.4}",
            p.fnr, q.fnr
        )));
    }
    let f = (q.fnr - p.fnr) / span;
    let (fa, fb) = if adv == Group::A { (f, 0.0) } else { (0.0, f) };
    let (ws, labels, groups) =
        randomized_entries(ctx, &RandomizedDesign::derandomized(fa, fb, 0.5));
    let [[a, b]] = ctx
        .evaluate_weighted(&ws.scores, &ws.weights, &labels, &groups, &[0.5])?
        .try_into()
        .expect("one threshold");
    let rd = RandomizedDesign::derandomized(fa, fb, 0.5);
    let mb = randomized_budget(
        &rd,
        ctx.d(),
        ctx.test.group_size(Group::A),
        ctx.test.group_size(Group::B),
    );
    let randomized = ctx.point(
        Design::Randomized {
            fraction_a: fa,
            fraction_b: fb,
            threshold: 0.5,
        },
        a,
        b,
        mb,
    );

    let group_solutions: Vec<OperatingPoint> = group
        .points
        .iter()
        .filter(|p| (p.a.gfnr - p.b.gfnr).abs() <= tolerance && p.mean_budget <= mb + BUDGET_SLACK)
        .copied()
        .collect();
    let first: Vec<[f64; 4]> = group_solutions
        .iter()
        .map(OperatingPoint::generalized_coords)
        .collect();
    let report = if first.is_empty() {
        DominanceReport {
            frontier: vec![FrontierCheck {
                coords: randomized.generalized_coords().to_vec(),
                dominated_by: None,
            }],
            dominated: 0,
            total: 1,
            fraction: 0.0,
        }
    } else {
        dominance_report(&first, &[randomized.generalized_coords()])?
    };
    Ok(EqualOpportunityComparison {
        randomized,
        budget_cap: mb,
        group_solutions,
        report,
    })
}

// ---------------------------------------------------------------------------
// Reports

/// Flat CSV record of one operating point. Column names are a stable contract.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRow {
    pub family: Family,
    pub budget_a: Option<usize>,
    pub budget_b: Option<usize>,
    pub alpha_low: Option<f64>,
    pub alpha_high: Option<f64>,
    pub early_stop_eps: Option<f64>,
    pub fraction_a: Option<f64>,
    pub fraction_b: Option<f64>,
    pub threshold: f64,
    pub n_a: usize,
    pub n_b: usize,
    pub neg_a: usize,
    pub pos_a: usize,
    pub neg_b: usize,
    pub pos_b: usize,
    pub fpr_a: f64,
    pub fnr_a: f64,
    pub gfpr_a: f64,
    pub gfnr_a: f64,
    pub fpr_b: f64,
    pub fnr_b: f64,
    pub gfpr_b: f64,
    pub gfnr_b: f64,
    pub mean_budget: f64,
    pub pooled_fpr: f64,
    pub pooled_fnr: f64,
    pub d_fpr: f64,
    pub d_fnr: f64,
    pub d_gfpr: f64,
    pub d_gfnr: f64,
    pub calibration_dev_a: f64,
    pub calibration_dev_b: f64,
    pub equal_opportunity_ok: bool,
    pub equal_odds_ok: bool,
    pub within_budget: bool,
}

impl PointRow {
    pub fn new(p: &OperatingPoint, base_rates: [f64; 2], tolerance: f64, b_max: f64) -> Self {
        let disparity = p.disparity(tolerance);
        let (pooled_fpr, pooled_fnr) = p.pooled();
        let dev = |g: &GroupPoint, mu: f64| {
            calibration_line_deviation(g.gfpr, g.gfnr, mu).unwrap_or(f64::NAN)
        };
        let mut row = PointRow {
            family: Family::Group,
            budget_a: None,
            budget_b: None,
            alpha_low: None,
            alpha_high: None,
            early_stop_eps: None,
            fraction_a: None,
            fraction_b: None,
            threshold: p.design.threshold(),
            n_a: p.n_a,
            n_b: p.n_b,
            neg_a: p.class_counts[0][0],
            pos_a: p.class_counts[0][1],
            neg_b: p.class_counts[1][0],
            pos_b: p.class_counts[1][1],
            fpr_a: p.a.fpr,
            fnr_a: p.a.fnr,
            gfpr_a: p.a.gfpr,
            gfnr_a: p.a.gfnr,
            fpr_b: p.b.fpr,
            fnr_b: p.b.fnr,
            gfpr_b: p.b.gfpr,
            gfnr_b: p.b.gfnr,
            mean_budget: p.mean_budget,
            pooled_fpr,
            pooled_fnr,
            d_fpr: disparity.d_fpr,
            d_fnr: disparity.d_fnr,
            d_gfpr: disparity.d_gfpr,
            d_gfnr: disparity.d_gfnr,
            calibration_dev_a: dev(&p.a, base_rates[0]),
            calibration_dev_b: dev(&p.b, base_rates[1]),
            equal_opportunity_ok: disparity.equal_opportunity_ok,
            equal_odds_ok: disparity.equal_odds_ok,
            within_budget: p.mean_budget <= b_max + BUDGET_SLACK,
        };
        match p.design {
            Design::Group {
                budget_a, budget_b, ..
            } => {
                row.family = Family::Group;
                row.budget_a = Some(budget_a);
                row.budget_b = Some(budget_b);
            }
            Design::Individual {
                alpha_low,
                alpha_high,
                early_stop_eps,
                ..
            } => {
                row.family = Family::Individual;
                row.alpha_low = Some(alpha_low);
                row.alpha_high = Some(alpha_high);
                row.early_stop_eps = Some(early_stop_eps);
            }
            Design::Randomized {
                fraction_a,
                fraction_b,
                ..
            } => {
                row.family = Family::Randomized;
                row.fraction_a = Some(fraction_a);
                row.fraction_b = Some(fraction_b);
            }
        }
        row
    }

    /// Rebuilds the operating point this row was written from.
    pub fn to_point(&self) -> Result<OperatingPoint, String> {
        let missing = |what: &str| format!("{} row lacks {what}", self.family.name());
        let design = match self.family {
            Family::Group => Design::Group {
                budget_a: self.budget_a.ok_or_else(|| missing("budget_a"))?,
                budget_b: self.budget_b.ok_or_else(|| missing("budget_b"))?,
                threshold: self.threshold,
            },
            Family::Individual => Design::Individual {
                alpha_low: self.alpha_low.ok_or_else(|| missing("alpha_low"))?,
                alpha_high: self.alpha_high.ok_or_else(|| missing("alpha_high"))?,
                threshold: self.threshold,
                early_stop_eps: self
                    .early_stop_eps
                    .ok_or_else(|| missing("early_stop_eps"))?,
            },
            Family::Randomized => Design::Randomized {
                fraction_a: self.fraction_a.ok_or_else(|| missing("fraction_a"))?,
                fraction_b: self.fraction_b.ok_or_else(|| missing("fraction_b"))?,
                threshold: self.threshold,
            },
        };
        Ok(OperatingPoint {
            design,
            a: GroupPoint {
                fpr: self.fpr_a,
                fnr: self.fnr_a,
                gfpr: self.gfpr_a,
                gfnr: self.gfnr_a,
            },
            b: GroupPoint {
                fpr: self.fpr_b,
                fnr: self.fnr_b,
                gfpr: self.gfpr_b,
                gfnr: self.gfnr_b,
            },
            mean_budget: self.mean_budget,
            n_a: self.n_a,
            n_b: self.n_b,
            class_counts: [[self.neg_a, self.pos_a], [self.neg_b, self.pos_b]],
        })
    }
}

/// Writes operating points as CSV (header included even when empty).
pub fn write_points(
    path: &Path,
    points: &[OperatingPoint],
    base_rates: [f64; 2],
    tolerance: f64,
    b_max: f64,
) -> Result<(), ExperimentError> {
    let csv_err = |source| ExperimentError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(csv_err)?;
    w.write_record(POINT_COLUMNS).map_err(csv_err)?;
    for p in points {
        w.serialize(PointRow::new(p, base_rates, tolerance, b_max))
            .map_err(csv_err)?;
    }
    w.flush().map_err(io_err(path))
}

/// Reads a points CSV written by [`write_points`].
pub fn read_points(path: &Path) -> Result<Vec<OperatingPoint>, ExperimentError> {
    let csv_err = |source| ExperimentError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let mut out = Vec::new();
    for row in r.deserialize::<PointRow>() {
        let row = row.map_err(csv_err)?;
        out.push(
            row.to_point()
                .map_err(|m| ExperimentError::InvalidConfig(format!("{}: {m}", path.display())))?,
        );
    }
    Ok(out)
}

/// Header of every points CSV.
pub const POINT_COLUMNS: [&str; 35] = [
    "family",
    "budget_a",
    "budget_b",
    "alpha_low",
    "alpha_high",
    "early_stop_eps",
    "fraction_a",
    "fraction_b",
    "threshold",
    "n_a",
    "n_b",
    "neg_a",
    "pos_a",
    "neg_b",
    "pos_b",
    "fpr_a",
    "fnr_a",
    "gfpr_a",
    "gfnr_a",
    "fpr_b",
    "fnr_b",
    "gfpr_b",
    "gfnr_b",
    "mean_budget",
    "pooled_fpr",
    "pooled_fnr",
    "d_fpr",
    "d_fnr",
    "d_gfpr",
    "d_gfnr",
    "calibration_dev_a",
    "calibration_dev_b",
    "equal_opportunity_ok",
    "equal_odds_ok",
    "within_budget",
];

/// Run metadata written next to the sweep tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub dataset: String,
    pub n_rows: usize,
    pub n_features: usize,
    pub seed: u64,
    pub split_seed: u64,
    pub split_fraction: f64,
    pub validation_fraction: f64,
    /// Cut of a below-mean grouping rule, computed on the training split.
    pub group_threshold: Option<f64>,
    pub train_base_rates: [f64; 2],
    pub test_base_rates: [f64; 2],
    pub forest: ForestConfig,
    pub selection: SelectionMode,
    pub sweep: SweepConfig,
    pub early_stop: Option<EarlyStopTuning>,
    pub files: Vec<String>,
}

/// Writes `<family>.csv` per result plus `manifest.json` into `dir`.
/// Outputs depend only on the inputs, so reruns are byte-identical.
pub fn emit_report(
    dir: &Path,
    results: &[RegionResult],
    manifest: &Manifest,
) -> Result<Vec<PathBuf>, ExperimentError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();
    let mut manifest = manifest.clone();
    for r in results {
        let path = dir.join(format!("{}.csv", r.family.name()));
        write_points(
            &path,
            &r.points,
            r.base_rates,
            manifest.sweep.tolerance,
            manifest.sweep.b_max,
        )?;
        manifest.files.push(format!("{}.csv", r.family.name()));
        written.push(path);
    }
    manifest.files.sort();
    manifest.files.dedup();
    let path = dir.join("manifest.json");
    write_json(&path, &manifest)?;
    written.push(path);
    Ok(written)
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ExperimentError> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(text.as_bytes()).map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synthesize;
    use crate::forest::ForestConfig;

    fn small_experiment() -> Experiment {
        let data = synthesize(600, 4, (0.9, 0.7), 5).unwrap();
        let config = ExperimentConfig {
            forest: ForestConfig {
                n_trees: 10,
                max_depth: 4,
                ..ForestConfig::default()
            },
            seed: 3,
            ..ExperimentConfig::default()
        };
        prepare_experiment(&data, &config).unwrap()
    }

    fn small_sweep(d: usize) -> SweepConfig {
        let thresholds = vec![0.3, 0.5, 0.7];
        SweepConfig {
            alphas: alpha_pairs(&[0.1, 0.3, 0.7, 0.9]),
            thresholds,
            budgets: (0..=d).collect(),
            fractions: vec![0.0, 0.5, 1.0],
            ..SweepConfig::defaults(d)
        }
    }

    #[test]
    fn grids() {
        let t = default_thresholds();
        assert_eq!(t.len(), 49);
        assert_eq!(t[0], 0.02);
        assert_eq!(t[48], 0.98);
        assert_eq!(default_budgets(3), vec![0, 1, 2, 3]);
        let wide = default_budgets(100);
        assert_eq!(wide.len(), 30);
        assert_eq!((wide[0], wide[29]), (0, 100));
        assert_eq!(
            alpha_pairs(&[0.1, 0.2, 0.3]),
            vec![(0.1, 0.2), (0.1, 0.3), (0.2, 0.3)]
        );
    }

    #[test]
    fn experiment_partitions() {
        let exp = small_experiment();
        assert_eq!(exp.test.n_rows(), 120);
        assert_eq!(exp.fit.n_rows() + exp.validation.n_rows(), 480);
        assert_eq!(exp.validation.n_rows(), 48);
        assert_eq!(exp.forest.trees().len(), 10);
    }

    #[test]
    fn full_budget_point_is_full_information() {
        let exp = small_experiment();
        let ctx = SweepContext::for_experiment(&exp).unwrap();
        let d = exp.test.n_features();
        let cfg = SweepConfig {
            budgets: vec![d],
            thresholds: vec![0.5],
            ..small_sweep(d)
        };
        let region = sweep_group_budgets(&ctx, &cfg).unwrap();
        assert_eq!(region.points.len(), 1);
        let full: Vec<u8> = (0..exp.test.n_rows())
            .map(|i| u8::from(exp.forest.predict_full(exp.test.row(i)) >= 0.5))
            .collect();
        let r = crate::metrics::rates(&full, exp.test.labels(), exp.test.groups()).unwrap();
        assert_eq!(region.points[0].a.fpr, r.a.fpr);
        assert_eq!(region.points[0].b.fnr, r.b.fnr);
        assert_eq!(region.points[0].mean_budget, d as f64);
    }

    #[test]
    fn zero_budget_points_are_trivial_corners() {
        let exp = small_experiment();
        let ctx = SweepContext::for_experiment(&exp).unwrap();
        let cfg = SweepConfig {
            budgets: vec![0],
            thresholds: vec![0.02, 0.98],
            ..small_sweep(4)
        };
        let region = sweep_group_budgets(&ctx, &cfg).unwrap();
        let corners: Vec<(f64, f64)> = region.points.iter().map(|p| (p.a.fpr, p.a.fnr)).collect();
        assert_eq!(corners, vec![(1.0, 0.0), (0.0, 1.0)]);
    }

    #[test]
    fn swept_points_regenerate() {
        let exp = small_experiment();
        let ctx = SweepContext::for_experiment(&exp).unwrap();
        let cfg = SweepConfig {
            early_stop_eps: 0.01,
            ..small_sweep(4)
        };
        let regions = [
            sweep_group_budgets(&ctx, &cfg).unwrap(),
            sweep_individual(&ctx, &cfg).unwrap(),
            sweep_randomized(&ctx, &cfg).unwrap(),
        ];
        for region in &regions {
            for p in region.points.iter().step_by(7) {
                let q = evaluate_design(
                    &exp.forest,
                    &exp.strategy,
                    &exp.test,
                    exp.train_base_rates,
                    &p.design,
                    1,
                )
                .unwrap();
                for (x, y) in [(p.a, q.a), (p.b, q.b)] {
                    assert!(
                        (x.fpr - y.fpr).abs() < 1e-9 && (x.fnr - y.fnr).abs() < 1e-9,
                        "{:?}",
                        p.design
                    );
                    assert!(
                        (x.gfpr - y.gfpr).abs() < 1e-9 && (x.gfnr - y.gfnr).abs() < 1e-9,
                        "{:?}",
                        p.design
                    );
                }
                assert!((p.mean_budget - q.mean_budget).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn filter_examples() {
        let exp = small_experiment();
        let ctx = SweepContext::for_experiment(&exp).unwrap();
        let cfg = small_sweep(4);
        let region = sweep_group_budgets(&ctx, &cfg).unwrap();
        assert_eq!(
            filter_equal_odds(&region.points, 1.0, 4.0).len(),
            region.points.len()
        );
        let tight = filter_equal_odds(&region.points, 0.01, 2.0);
        let loose = filter_equal_odds(&region.points, 0.05, 3.0);
        assert!(tight
            .iter()
            .all(|s| loose.iter().any(|l| l.point == s.point)));
    }

    #[test]
    fn dominance_examples() {
        let a = [[0.1, 0.1]];
        let b = [[0.2, 0.2]];
        assert_eq!(dominance_report(&a, &b).unwrap().fraction, 1.0);
        let same = [[0.1, 0.5], [0.3, 0.2]];
        assert_eq!(dominance_report(&same, &same).unwrap().fraction, 1.0);
        let other = [[0.2, 0.4]];
        assert_eq!(dominance_report(&same, &other).unwrap().fraction, 0.0);
        assert!(dominance_report::<2>(&[], &other).is_err());
    }

    #[test]
    fn report_files_round_trip_and_are_stable() {
        let exp = small_experiment();
        let ctx = SweepContext::for_experiment(&exp).unwrap();
        let cfg = small_sweep(4);
        let region = sweep_group_budgets(&ctx, &cfg).unwrap();
        let empty = RegionResult {
            family: Family::Randomized,
            base_rates: region.base_rates,
            points: vec![],
        };
        let manifest = Manifest {
            tool: "test".into(),
            version: "0".into(),
            dataset: "synthetic".into(),
            n_rows: 600,
            n_features: 4,
            seed: 3,
            split_seed: exp.split.seed,
            split_fraction: 0.8,
            validation_fraction: 0.1,
            group_threshold: None,
            train_base_rates: exp.train_base_rates,
            test_base_rates: region.base_rates,
            forest: exp.forest.config().clone(),
            selection: SelectionMode::Static,
            sweep: cfg,
            early_stop: None,
            files: vec![],
        };
        let dir = tempfile::tempdir().unwrap();
        let (one, two) = (dir.path().join("one"), dir.path().join("two"));
        emit_report(&one, &[region.clone(), empty.clone()], &manifest).unwrap();
        emit_report(&two, &[region.clone(), empty], &manifest).unwrap();
        for f in ["group.csv", "randomized.csv", "manifest.json"] {
            assert_eq!(
                fs::read(one.join(f)).unwrap(),
                fs::read(two.join(f)).unwrap()
            );
        }
        let header = fs::read_to_string(one.join("randomized.csv")).unwrap();
        assert_eq!(header.lines().count(), 1);
        assert_eq!(read_points(&one.join("group.csv")).unwrap(), region.points);
    }
}
