//! Run settings shared by command-line flags and TOML config files.
//!
//! Every flag `--foo-bar` has a config key `foo_bar`. A flag beats the config
//! file, which beats built-in defaults.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use activefair::acquisition::SelectionMode;
use activefair::experiments::{ExperimentConfig, Family};
use activefair::forest::ForestConfig;
use clap::{Args, ValueEnum};
use serde::Deserialize;

use crate::CliError;

/// Environment variable consulted for the output directory when neither a
/// flag nor the config file sets one.
pub const OUT_ENV: &str = "ACTIVEFAIR_OUT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Group,
    Individual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyChoice {
    Group,
    Individual,
    Randomized,
    All,
}

impl FamilyChoice {
    pub fn families(self) -> Vec<Family> {
        match self {
            FamilyChoice::Group => vec![Family::Group],
            FamilyChoice::Individual => vec![Family::Individual],
            FamilyChoice::Randomized => vec![Family::Randomized],
            FamilyChoice::All => Family::ALL.to_vec(),
        }
    }
}

/// Mean-budget cap, either absolute or as a multiple of the feature count
/// (`"0.5d"`).
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(try_from = "RawCap")]
pub enum BudgetCap {
    Absolute(f64),
    PerFeature(f64),
}

impl BudgetCap {
    pub fn resolve(self, d: usize) -> f64 {
        match self {
            BudgetCap::Absolute(b) => b,
            BudgetCap::PerFeature(k) => k * d as f64,
        }
    }
}

impl Default for BudgetCap {
    fn default() -> Self {
        BudgetCap::PerFeature(0.5)
    }
}

impl FromStr for BudgetCap {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        let bad = || {
            format!("invalid budget cap `{s}`: expected a number or a multiple of d such as `0.5d`")
        };
        if let Some(k) = s.strip_suffix('d') {
            let k = k.trim();
            let k = if k.is_empty() {
                1.0
            } else {
                k.parse::<f64>().map_err(|_| bad())?
            };
            return Ok(BudgetCap::PerFeature(k));
        }
        s.parse::<f64>().map(BudgetCap::Absolute).map_err(|_| bad())
    }
}

impl fmt::Display for BudgetCap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BudgetCap::Absolute(b) => write!(f, "{b}"),
            BudgetCap::PerFeature(k) => write!(f, "{k}d"),
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawCap {
    Number(f64),
    Text(String),
}

impl TryFrom<RawCap> for BudgetCap {
    type Error = String;

    fn try_from(raw: RawCap) -> Result<Self, String> {
        match raw {
            RawCap::Number(b) => Ok(BudgetCap::Absolute(b)),
            RawCap::Text(s) => s.parse(),
        }
    }
}

fn parse_selection(s: &str) -> Result<SelectionMode, String> {
    s.parse()
}

/// Optional run settings. Unset fields fall back to the config file, then to
/// defaults.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    /// Dataset CSV.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Schema sidecar; defaults to `<data stem>.schema.toml` next to the CSV.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Previously trained forest to reuse instead of training.
    #[arg(long)]
    pub forest: Option<PathBuf>,
    /// Output directory (falls back to $ACTIVEFAIR_OUT, then `out`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Directory holding sweep tables (report only).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Top-level seed; required for any command that splits or trains.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub n_trees: Option<usize>,
    #[arg(long)]
    pub max_depth: Option<usize>,
    #[arg(long)]
    pub min_leaf: Option<usize>,
    /// Features tried per split (default: sqrt d).
    #[arg(long)]
    pub mtry: Option<usize>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub bootstrap: Option<bool>,
    #[arg(long)]
    pub leaf_smoothing: Option<f64>,
    #[arg(long)]
    pub split_fraction: Option<f64>,
    #[arg(long)]
    pub validation_fraction: Option<f64>,
    /// Feature selection: static or greedy.
    #[arg(long, value_parser = parse_selection)]
    pub selection: Option<SelectionMode>,
    /// Cap on candidate values per feature for greedy selection.
    #[arg(long)]
    pub max_candidates: Option<usize>,
    #[arg(long, value_enum)]
    pub policy: Option<PolicyKind>,
    #[arg(long)]
    pub budget_a: Option<usize>,
    #[arg(long)]
    pub budget_b: Option<usize>,
    #[arg(long)]
    pub alpha_low: Option<f64>,
    #[arg(long)]
    pub alpha_high: Option<f64>,
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Early-stopping tolerance; the sweep tunes it on validation rows when unset.
    #[arg(long)]
    pub early_stop_eps: Option<f64>,
    #[arg(long)]
    pub early_stop_window: Option<usize>,
    #[arg(long, value_enum)]
    pub family: Option<FamilyChoice>,
    /// Filter sweep results to equal-odds solutions within the budget cap.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub equal_odds: Option<bool>,
    /// Parity tolerance.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Mean-budget cap: a number or a multiple of d such as `0.5d`.
    #[arg(long)]
    pub b_max: Option<BudgetCap>,
    /// Reliability bins in the audit report.
    #[arg(long)]
    pub n_bins: Option<usize>,
}

macro_rules! prefer {
    ($first:ident, $second:ident; $($field:ident),* $(,)?) => {
        Settings { $($field: $first.$field.or($second.$field)),* }
    };
}

impl Settings {
    /// Field-wise `self` over `fallback`.
    pub fn or(self, fallback: Settings) -> Settings {
        prefer!(self, fallback;
            data, schema, forest, out, input, seed, n_trees, max_depth, min_leaf, mtry,
            bootstrap, leaf_smoothing, split_fraction, validation_fraction, selection,
            max_candidates, policy, budget_a, budget_b, alpha_low, alpha_high, threshold,
            early_stop_eps, early_stop_window, family, equal_odds, epsilon, b_max, n_bins,
        )
    }

    pub fn from_toml_file(path: &Path) -> Result<Settings, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| CliError::Usage(format!("config {}: {}", path.display(), e.message())))
    }

    pub fn data_path(&self) -> Result<&Path, CliError> {
        self.data
            .as_deref()
            .ok_or_else(|| CliError::Usage("--data is required".into()))
    }

    pub fn schema_path(&self) -> Result<PathBuf, CliError> {
        if let Some(p) = &self.schema {
            return Ok(p.clone());
        }
        let data = self.data_path()?;
        let stem = data.file_stem().ok_or_else(|| {
            CliError::Usage(format!(
                "cannot derive a schema path from {}",
                data.display()
            ))
        })?;
        let mut name = stem.to_os_string();
        name.push(".schema.toml");
        Ok(data.with_file_name(name))
    }

    /// Output directory: flag or config, then `$ACTIVEFAIR_OUT`, then `out`.
    pub fn out_dir(&self) -> PathBuf {
        self.out
            .clone()
            .or_else(|| {
                std::env::var_os(OUT_ENV)
                    .filter(|v| !v.is_empty())
                    .map(PathBuf::from)
            })
            .unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn seed(&self) -> Result<u64, CliError> {
        self.seed.ok_or_else(|| {
            CliError::Usage("--seed is required for commands that split or train".into())
        })
    }

    pub fn experiment_config(&self) -> Result<ExperimentConfig, CliError> {
        let base = ExperimentConfig::default();
        let forest = ForestConfig::default();
        Ok(ExperimentConfig {
            split_fraction: self.split_fraction.unwrap_or(base.split_fraction),
            validation_fraction: self.validation_fraction.unwrap_or(base.validation_fraction),
            forest: ForestConfig {
                n_trees: self.n_trees.unwrap_or(forest.n_trees),
                max_depth: self.max_depth.unwrap_or(forest.max_depth),
                min_leaf: self.min_leaf.unwrap_or(forest.min_leaf),
                mtry: self.mtry.or(forest.mtry),
                bootstrap: self.bootstrap.unwrap_or(forest.bootstrap),
                leaf_smoothing: self.leaf_smoothing.unwrap_or(forest.leaf_smoothing),
                seed: forest.seed,
            },
            selection: self.selection.unwrap_or(base.selection),
            max_candidates: self.max_candidates.unwrap_or(base.max_candidates),
            seed: self.seed()?,
        })
    }
}
