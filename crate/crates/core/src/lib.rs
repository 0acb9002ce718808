//! Fair binary classification when features are acquired one at a time.
//!
//! A random forest scores individuals from whatever subset of features has
//! been revealed so far, marginalizing over the branches it cannot resolve.
//! Policies decide how many features to ask for: a fixed budget per group, or
//! an individual confidence band that keeps asking until the score leaves it.
//! Sweeps over policy parameters trace achievable (FPR, FNR) regions per
//! group, which are filtered for equal opportunity or equal odds and compared
//! against randomized post-processing baselines at matched mean budget.
//!
//! - [`data`]: CSV ingestion against a schema, group partition, splits,
//!   synthetic data.
//! - [`forest`]: tree ensemble training and partial-input inference.
//! - [`acquisition`]: next-feature selection by importance or expected change.
//! - [`policy`]: group-budget classification and per-individual inquiries.
//! - [`metrics`]: error rates, generalized rates, calibration, AUC, Pareto
//!   fronts.
//! - [`baselines`]: randomized classifiers that trade accuracy for parity.
//! - [`experiments`]: sweeps, equal-odds filtering, dominance and report
//!   files.
//! - [`seed`]: named seed streams derived from one top-level seed.

pub mod acquisition;
pub mod baselines;
pub mod data;
pub mod experiments;
pub mod forest;
pub mod metrics;
pub mod policy;
pub mod seed;

#[cfg(test)]
pub(crate) mod testutil;
