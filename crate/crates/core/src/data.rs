//! Dataset ingestion, schema handling, group partitioning and splits.
//!
//! A [`Dataset`] is a dense, fully observed feature matrix with a binary
//! target and a two-way partition of the rows into groups `A` and `B`
//! (the complement of `A`). Categorical columns are stored as integer codes
//! whose code table lives in the schema.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed csv {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("invalid schema: {0}")]
    Schema(String),
    #[error("column `{0}` declared in the schema is missing from the csv header")]
    MissingColumn(String),
    #[error("csv column `{0}` is not declared in the schema")]
    UndeclaredColumn(String),
    #[error("target column `{column}` is not binary: {detail}")]
    NonBinaryTarget { column: String, detail: String },
    #[error("row {row}, column `{column}`: missing cell")]
    MissingCell { row: usize, column: String },
    #[error("row {row}, column `{column}`: cannot parse `{value}` as a number")]
    UnparseableCell {
        row: usize,
        column: String,
        value: String,
    },
    #[error("group {0} is empty")]
    EmptyGroup(Group),
    #[error("dataset has no rows")]
    Empty,
    #[error("fraction {0} must lie strictly between 0 and 1")]
    InvalidFraction(f64),
    #[error("invalid synthetic configuration: {0}")]
    InvalidSynthetic(String),
}

/// The two population groups: `A` and its complement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Group {
    A,
    B,
}

impl Group {
    pub const BOTH: [Group; 2] = [Group::A, Group::B];

    pub fn other(self) -> Group {
        match self {
            Group::A => Group::B,
            Group::B => Group::A,
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Group::A => "A",
            Group::B => "B",
        })
    }
}

/// Row selector for group-wise statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupSel {
    All,
    Only(Group),
}

impl GroupSel {
    pub fn contains(self, g: Group) -> bool {
        match self {
            GroupSel::All => true,
            GroupSel::Only(h) => g == h,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnRole {
    Feature,
    Target,
    Sensitive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    pub role: ColumnRole,
    /// Code table for categorical columns: `codes[c]` is the raw value of code `c`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub codes: Vec<String>,
}

/// How the sensitive column splits rows into group `A` and its complement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum GroupRule {
    /// `A` = rows whose raw value equals `value`.
    Equals { value: String },
    /// `A` = rows strictly below the mean of the column. The mean is taken
    /// over all rows at load time and can be re-derived from a training split
    /// with [`Dataset::regroup_from_rows`].
    BelowMean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitiveSpec {
    #[serde(flatten)]
    pub rule: GroupRule,
    #[serde(default = "default_group_a")]
    pub group_a: String,
    #[serde(default = "default_group_b")]
    pub group_b: String,
    /// Also expose the sensitive column to the model as a feature.
    #[serde(default)]
    pub as_feature: bool,
}

fn default_group_a() -> String {
    "A".into()
}

fn default_group_b() -> String {
    "B".into()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    /// Raw target value mapped to label 1. Without it the column must hold 0/1.
    #[serde(default)]
    pub positive: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct ColumnDecl {
    kind: ColumnKind,
    role: ColumnRole,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SchemaFile {
    #[serde(default)]
    target: TargetSpec,
    sensitive: SensitiveSpec,
    columns: BTreeMap<String, ColumnDecl>,
}

/// Column layout of a dataset. Column order follows the csv header once loaded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub columns: Vec<ColumnSpec>,
    pub target: TargetSpec,
    pub sensitive: SensitiveSpec,
}

impl Schema {
    pub fn new(
        columns: Vec<ColumnSpec>,
        target: TargetSpec,
        sensitive: SensitiveSpec,
    ) -> Result<Self, DataError> {
        let schema = Schema {
            columns,
            target,
            sensitive,
        };
        schema.validate()?;
        Ok(schema)
    }

    /// Parses the TOML sidecar format:
    ///
    /// ```toml
    /// [target]
    /// positive = ">50K"
    ///
    /// [sensitive]
    /// rule = "equals"      # or "below_mean"
    /// value = "White"
    ///
    /// [columns]
    /// age = { kind = "numeric", role = "feature" }
    /// ```
    pub fn from_toml_str(text: &str) -> Result<Self, DataError> {
        let file: SchemaFile =
            toml::from_str(text).map_err(|e| DataError::Schema(e.message().to_string()))?;
        let columns = file
            .columns
            .into_iter()
            .map(|(name, decl)| ColumnSpec {
                name,
                kind: decl.kind,
                role: decl.role,
                codes: Vec::new(),
            })
            .collect();
        Schema::new(columns, file.target, file.sensitive)
    }

    pub fn load(path: &Path) -> Result<Self, DataError> {
        let text = std::fs::read_to_string(path).map_err(|source| DataError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Schema::from_toml_str(&text)
    }

    fn validate(&self) -> Result<(), DataError> {
        let count = |role| self.columns.iter().filter(|c| c.role == role).count();
        if count(ColumnRole::Target) != 1 {
            return Err(DataError::Schema(
                "exactly one target column required".into(),
            ));
        }
        if count(ColumnRole::Sensitive) != 1 {
            return Err(DataError::Schema(
                "exactly one sensitive column required".into(),
            ));
        }
        if self.n_features() == 0 {
            return Err(DataError::Schema(
                "at least one feature column required".into(),
            ));
        }
        let mut seen = BTreeSet::new();
        for c in &self.columns {
            if !seen.insert(c.name.as_str()) {
                return Err(DataError::Schema(format!("duplicate column `{}`", c.name)));
            }
        }
        if matches!(self.sensitive.rule, GroupRule::BelowMean)
            && self.sensitive_column().kind != ColumnKind::Numeric
        {
            return Err(DataError::Schema(
                "below_mean grouping needs a numeric sensitive column".into(),
            ));
        }
        Ok(())
    }

    fn is_feature(&self, c: &ColumnSpec) -> bool {
        c.role == ColumnRole::Feature
            || (c.role == ColumnRole::Sensitive && self.sensitive.as_feature)
    }

    /// Feature columns in model order.
    pub fn features(&self) -> impl Iterator<Item = &ColumnSpec> {
        self.columns.iter().filter(move |c| self.is_feature(c))
    }

    pub fn n_features(&self) -> usize {
        self.features().count()
    }

    pub fn feature_kinds(&self) -> Vec<ColumnKind> {
        self.features().map(|c| c.kind).collect()
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.features().map(|c| c.name.clone()).collect()
    }

    pub fn target_column(&self) -> &ColumnSpec {
        self.columns
            .iter()
            .find(|c| c.role == ColumnRole::Target)
            .expect("validated schema has a target")
    }

    pub fn sensitive_column(&self) -> &ColumnSpec {
        self.columns
            .iter()
            .find(|c| c.role == ColumnRole::Sensitive)
            .expect("validated schema has a sensitive column")
    }
}

/// A fully observed, labelled dataset partitioned into two groups.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Schema,
    n_features: usize,
    values: Vec<f64>,
    labels: Vec<u8>,
    groups: Vec<Group>,
    /// Numeric value (or categorical code) of the sensitive column.
    sensitive: Vec<f64>,
    group_threshold: Option<f64>,
}

impl Dataset {
    /// Builds a dataset from row-major feature values. Fails on ragged input,
    /// an empty group, or a single-class target.
    pub fn from_parts(
        schema: Schema,
        values: Vec<f64>,
        labels: Vec<u8>,
        groups: Vec<Group>,
        sensitive: Vec<f64>,
        group_threshold: Option<f64>,
    ) -> Result<Self, DataError> {
        let n = labels.len();
        let d = schema.n_features();
        if n == 0 {
            return Err(DataError::Empty);
        }
        if values.len() != n * d || groups.len() != n || sensitive.len() != n {
            return Err(DataError::Schema(format!(
                "inconsistent lengths: {} values for {n} rows x {d} features, {} groups",
                values.len(),
                groups.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y > 1) {
            return Err(DataError::NonBinaryTarget {
                column: schema.target_column().name.clone(),
                detail: format!("label {bad}"),
            });
        }
        let ds = Dataset {
            schema,
            n_features: d,
            values,
            labels,
            groups,
            sensitive,
            group_threshold,
        };
        ds.check_groups()?;
        let pos = ds.labels.iter().filter(|&&y| y == 1).count();
        if pos == 0 || pos == n {
            return Err(DataError::NonBinaryTarget {
                column: ds.schema.target_column().name.clone(),
                detail: "only one class present".into(),
            });
        }
        Ok(ds)
    }

    fn check_groups(&self) -> Result<(), DataError> {
        for g in Group::BOTH {
            if !self.groups.contains(&g) {
                return Err(DataError::EmptyGroup(g));
            }
        }
        Ok(())
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.n_features)
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_features + j]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn group_size(&self, g: Group) -> usize {
        self.groups.iter().filter(|&&h| h == g).count()
    }

    /// Mean-age style cut used for [`GroupRule::BelowMean`], if any.
    pub fn group_threshold(&self) -> Option<f64> {
        self.group_threshold
    }

    pub fn feature_kinds(&self) -> Vec<ColumnKind> {
        self.schema.feature_kinds()
    }

    /// Fraction of positive labels among the selected rows.
    pub fn base_rate(&self, sel: GroupSel) -> Result<f64, DataError> {
        let (mut n, mut pos) = (0usize, 0usize);
        for (&y, &g) in self.labels.iter().zip(&self.groups) {
            if sel.contains(g) {
                n += 1;
                pos += usize::from(y);
            }
        }
        if n == 0 {
            return Err(match sel {
                GroupSel::Only(g) => DataError::EmptyGroup(g),
                GroupSel::All => DataError::Empty,
            });
        }
        Ok(pos as f64 / n as f64)
    }

    /// Materializes the given rows, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset, DataError> {
        let d = self.n_features;
        let mut values = Vec::with_capacity(indices.len() * d);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        let ds = Dataset {
            schema: self.schema.clone(),
            n_features: d,
            values,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            groups: indices.iter().map(|&i| self.groups[i]).collect(),
            sensitive: indices.iter().map(|&i| self.sensitive[i]).collect(),
            group_threshold: self.group_threshold,
        };
        if ds.labels.is_empty() {
            return Err(DataError::Empty);
        }
        Ok(ds)
    }

    /// For [`GroupRule::BelowMean`] schemas, recomputes the group cut as the
    /// mean of the sensitive column over `rows` (typically the training split)
    /// and reassigns every row. Other rules are left untouched.
    pub fn regroup_from_rows(&self, rows: &[usize]) -> Result<Dataset, DataError> {
        if !matches!(self.schema.sensitive.rule, GroupRule::BelowMean) {
            return Ok(self.clone());
        }
        if rows.is_empty() {
            return Err(DataError::Empty);
        }
        let mean = rows.iter().map(|&i| self.sensitive[i]).sum::<f64>() / rows.len() as f64;
        let mut ds = self.clone();
        ds.groups = ds
            .sensitive
            .iter()
            .map(|&v| below_mean_group(v, mean))
            .collect();
        ds.group_threshold = Some(mean);
        ds.check_groups()?;
        Ok(ds)
    }
}

fn below_mean_group(value: f64, mean: f64) -> Group {
    if value < mean {
        Group::A
    } else {
        Group::B
    }
}

fn is_missing(cell: &str) -> bool {
    matches!(cell, "" | "?" | "NA" | "NaN" | "nan")
}

/// Loads a comma-separated file with a header row.
///
/// Categorical columns (and the target, when a positive value is named) are
/// mapped to integer codes in sorted order of their raw values; the code table
/// is stored in the returned dataset's schema. Rows with missing cells are
/// rejected rather than imputed.
pub fn load_csv(path: &Path, schema: &Schema) -> Result<Dataset, DataError> {
    let file = std::fs::File::open(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let csv_err = |source| DataError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(file);
    let header: Vec<String> = reader
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    for c in &schema.columns {
        if !header.contains(&c.name) {
            return Err(DataError::MissingColumn(c.name.clone()));
        }
    }
    let mut ordered = Vec::with_capacity(header.len());
    for h in &header {
        match schema.columns.iter().find(|c| &c.name == h) {
            Some(c) => ordered.push(c.clone()),
            None => return Err(DataError::UndeclaredColumn(h.clone())),
        }
    }

    let mut raw: Vec<Vec<String>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        let row: Vec<String> = record.iter().map(|c| c.trim().to_string()).collect();
        for (col, cell) in ordered.iter().zip(&row) {
            if is_missing(cell) {
                return Err(DataError::MissingCell {
                    row: raw.len(),
                    column: col.name.clone(),
                });
            }
        }
        raw.push(row);
    }
    if raw.is_empty() {
        return Err(DataError::Empty);
    }

    for (j, col) in ordered.iter_mut().enumerate() {
        if col.kind == ColumnKind::Categorical {
            let distinct: BTreeSet<&str> = raw.iter().map(|r| r[j].as_str()).collect();
            col.codes = distinct.into_iter().map(String::from).collect();
        }
    }
    let schema = Schema::new(ordered, schema.target.clone(), schema.sensitive.clone())?;

    let parse = |row: usize, col: &ColumnSpec, cell: &str| -> Result<f64, DataError> {
        match col.kind {
            ColumnKind::Categorical => Ok(col
                .codes
                .binary_search_by(|c| c.as_str().cmp(cell))
                .expect("code table built from these cells")
                as f64),
            ColumnKind::Numeric => cell
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| DataError::UnparseableCell {
                    row,
                    column: col.name.clone(),
                    value: cell.to_string(),
                }),
        }
    };

    let target_idx = schema
        .columns
        .iter()
        .position(|c| c.role == ColumnRole::Target)
        .unwrap();
    let sens_idx = schema
        .columns
        .iter()
        .position(|c| c.role == ColumnRole::Sensitive)
        .unwrap();
    let feature_idx: Vec<usize> = (0..schema.columns.len())
        .filter(|&j| schema.is_feature(&schema.columns[j]))
        .collect();

    let target_col = &schema.columns[target_idx];
    let distinct_targets: BTreeSet<&str> = raw.iter().map(|r| r[target_idx].as_str()).collect();
    if distinct_targets.len() > 2 {
        return Err(DataError::NonBinaryTarget {
            column: target_col.name.clone(),
            detail: format!("{} distinct values", distinct_targets.len()),
        });
    }

    let n = raw.len();
    let mut values = Vec::with_capacity(n * feature_idx.len());
    let mut labels = Vec::with_capacity(n);
    let mut sensitive = Vec::with_capacity(n);
    let mut raw_sensitive = Vec::with_capacity(n);
    for (i, row) in raw.iter().enumerate() {
        for &j in &feature_idx {
            values.push(parse(i, &schema.columns[j], &row[j])?);
        }
        let cell = row[target_idx].as_str();
        let label = match &schema.target.positive {
            Some(p) => u8::from(cell == p),
            None => match cell.parse::<f64>() {
                Ok(0.0) => 0,
                Ok(1.0) => 1,
                _ => {
                    return Err(DataError::NonBinaryTarget {
                        column: target_col.name.clone(),
                        detail: format!("value `{cell}` is not 0/1 and no positive value is set"),
                    })
                }
            },
        };
        labels.push(label);
        let scol = &schema.columns[sens_idx];
        sensitive.push(parse(i, scol, &row[sens_idx])?);
        raw_sensitive.push(row[sens_idx].as_str());
    }

    let (groups, threshold) = match &schema.sensitive.rule {
        GroupRule::Equals { value } => (
            raw_sensitive
                .iter()
                .map(|&v| if v == value { Group::A } else { Group::B })
                .collect(),
            None,
        ),
        GroupRule::BelowMean => {
            let mean = sensitive.iter().sum::<f64>() / n as f64;
            (
                sensitive
                    .iter()
                    .map(|&v| below_mean_group(v, mean))
                    .collect(),
                Some(mean),
            )
        }
    };
    Dataset::from_parts(schema, values, labels, groups, sensitive, threshold)
}

/// Disjoint train/test row indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

/// Random split with `round(fraction * n)` training rows. Both index lists
/// are returned in ascending order.
pub fn split(dataset: &Dataset, fraction: f64, seed: u64) -> Result<Split, DataError> {
    split_indices(dataset.n_rows(), fraction, seed)
}

pub fn split_indices(n: usize, fraction: f64, seed: u64) -> Result<Split, DataError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(DataError::InvalidFraction(fraction));
    }
    let n_train = (fraction * n as f64).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut train = order[..n_train].to_vec();
    let mut test = order[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, test, seed })
}

/// Two-group synthetic data with group-specific signal-to-noise.
///
/// Rows alternate between groups (even rows are `A`). Each row has a latent
/// signal `u ~ N(0, 1)` and label `1[u > 0]`. Feature `j` is
/// `w_j * (s * u + sqrt(1 - s^2) * e_j)` with `e_j ~ N(0, 1)`, weights
/// decaying geometrically in `j` and `s` the group's separability, so the
/// features of the more separable group carry more of the signal.
pub fn synthesize(
    n: usize,
    d: usize,
    separabilities: (f64, f64),
    seed: u64,
) -> Result<Dataset, DataError> {
    if n < 10 {
        return Err(DataError::InvalidSynthetic(format!("n = {n} < 10")));
    }
    if d < 2 {
        return Err(DataError::InvalidSynthetic(format!("d = {d} < 2")));
    }
    for s in [separabilities.0, separabilities.1] {
        if !(s > 0.0 && s < 1.0) {
            return Err(DataError::InvalidSynthetic(format!(
                "separability {s} must lie strictly between 0 and 1"
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    let mut groups = Vec::with_capacity(n);
    for i in 0..n {
        let group = if i % 2 == 0 { Group::A } else { Group::B };
        let sep = match group {
            Group::A => separabilities.0,
            Group::B => separabilities.1,
        };
        let u: f64 = rng.sample(StandardNormal);
        let spread = (1.0 - sep * sep).sqrt();
        for j in 0..d {
            let w = 1.5 * 0.75f64.powi(j as i32);
            let noise: f64 = rng.sample(StandardNormal);
            values.push(w * (sep * u + spread * noise));
        }
        // The first four rows pin both classes in both groups.
        let label = if i < 4 {
            u8::from(i >= 2)
        } else {
            u8::from(u > 0.0)
        };
        labels.push(label);
        groups.push(group);
    }
    let mut columns: Vec<ColumnSpec> = (0..d)
        .map(|j| ColumnSpec {
            name: format!("x{j}"),
            kind: ColumnKind::Numeric,
            role: ColumnRole::Feature,
            codes: Vec::new(),
        })
        .collect();
    columns.push(ColumnSpec {
        name: "y".into(),
        kind: ColumnKind::Numeric,
        role: ColumnRole::Target,
        codes: Vec::new(),
    });
    columns.push(ColumnSpec {
        name: "group".into(),
        kind: ColumnKind::Categorical,
        role: ColumnRole::Sensitive,
        codes: vec!["A".into(), "B".into()],
    });
    let schema = Schema::new(
        columns,
        TargetSpec::default(),
        SensitiveSpec {
            rule: GroupRule::Equals { value: "A".into() },
            group_a: default_group_a(),
            group_b: default_group_b(),
            as_feature: false,
        },
    )?;
    let sensitive = groups
        .iter()
        .map(|&g| if g == Group::A { 0.0 } else { 1.0 })
        .collect();
    Dataset::from_parts(schema, values, labels, groups, sensitive, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    const TOY_SCHEMA: &str = r#"
        [sensitive]
        rule = "equals"
        value = "a"

        [columns]
        x = { kind = "numeric", role = "feature" }
        g = { kind = "categorical", role = "sensitive" }
        y = { kind = "numeric", role = "target" }
    "#;

    fn write_csv(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn toy_csv_base_rate() {
        let schema = Schema::from_toml_str(TOY_SCHEMA).unwrap();
        let f = write_csv("x,g,y\n0.5,a,0\n1.5,b,1\n2.5,a,1\n");
        let ds = load_csv(f.path(), &schema).unwrap();
        assert_eq!(ds.n_rows(), 3);
        assert_eq!(ds.n_features(), 1);
        assert!((ds.base_rate(GroupSel::All).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(ds.groups(), &[Group::A, Group::B, Group::A]);
        assert_eq!(ds.row(1), &[1.5]);
    }

    #[test]
    fn categorical_codes_are_sorted_and_recorded() {
        let text = r#"
            [target]
            positive = "yes"
            [sensitive]
            rule = "equals"
            value = "a"
            [columns]
            color = { kind = "categorical", role = "feature" }
            g = { kind = "categorical", role = "sensitive" }
            y = { kind = "categorical", role = "target" }
        "#;
        let schema = Schema::from_toml_str(text).unwrap();
        let f = write_csv("color,g,y\nred,a,yes\nblue,b,no\ngreen,a,no\nred,b,yes\n");
        let ds = load_csv(f.path(), &schema).unwrap();
        let color = &ds.schema().columns[0];
        assert_eq!(color.codes, vec!["blue", "green", "red"]);
        let col: Vec<f64> = ds.rows().map(|r| r[0]).collect();
        assert_eq!(col, vec![2.0, 0.0, 1.0, 2.0]);
        assert_eq!(ds.labels(), &[1, 0, 0, 1]);
    }

    #[test]
    fn missing_column_is_reported() {
        let schema = Schema::from_toml_str(TOY_SCHEMA).unwrap();
        let f = write_csv("x,y\n0.5,0\n1.5,1\n");
        assert!(
            matches!(load_csv(f.path(), &schema), Err(DataError::MissingColumn(c)) if c == "g")
        );
    }

    #[test]
    fn non_binary_target_is_rejected() {
        let schema = Schema::from_toml_str(TOY_SCHEMA).unwrap();
        let f = write_csv("x,g,y\n0.5,a,0\n1.5,b,2\n");
        assert!(matches!(
            load_csv(f.path(), &schema),
            Err(DataError::NonBinaryTarget { .. })
        ));
    }

    #[test]
    fn unparseable_and_missing_cells_are_rejected() {
        let schema = Schema::from_toml_str(TOY_SCHEMA).unwrap();
        let f = write_csv("x,g,y\nabc,a,0\n1.5,b,1\n");
        assert!(matches!(
            load_csv(f.path(), &schema),
            Err(DataError::UnparseableCell { row: 0, .. })
        ));
        let f = write_csv("x,g,y\n0.5,a,0\n?,b,1\n");
        assert!(matches!(
            load_csv(f.path(), &schema),
            Err(DataError::MissingCell { row: 1, .. })
        ));
    }

    #[test]
    fn empty_group_is_rejected() {
        let schema = Schema::from_toml_str(TOY_SCHEMA).unwrap();
        let f = write_csv("x,g,y\n0.5,a,0\n1.5,a,1\n");
        assert!(matches!(
            load_csv(f.path(), &schema),
            Err(DataError::EmptyGroup(Group::B))
        ));
    }

    #[test]
    fn schema_requires_single_target_and_sensitive() {
        let text = r#"
            [sensitive]
            rule = "below_mean"
            [columns]
            x = { kind = "numeric", role = "feature" }
            y = { kind = "numeric", role = "target" }
        "#;
        assert!(matches!(
            Schema::from_toml_str(text),
            Err(DataError::Schema(_))
        ));
    }

    #[test]
    fn below_mean_regrouping_uses_given_rows() {
        let text = r#"
            [sensitive]
            rule = "below_mean"
            [columns]
            x = { kind = "numeric", role = "feature" }
            age = { kind = "numeric", role = "sensitive" }
            y = { kind = "numeric", role = "target" }
        "#;
        let schema = Schema::from_toml_str(text).unwrap();
        let f = write_csv("x,age,y\n0,20,0\n1,30,1\n2,40,0\n3,90,1\n");
        let ds = load_csv(f.path(), &schema).unwrap();
        assert_eq!(ds.group_threshold(), Some(45.0));
        assert_eq!(ds.groups(), &[Group::A, Group::A, Group::A, Group::B]);
        let re = ds.regroup_from_rows(&[0, 1]).unwrap();
        assert_eq!(re.group_threshold(), Some(25.0));
        assert_eq!(re.groups(), &[Group::A, Group::B, Group::B, Group::B]);
    }

    #[test]
    fn split_sizes_and_determinism() {
        let s = split_indices(10, 0.8, 7).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (8, 2));
        assert!(s.train.iter().all(|i| !s.test.contains(i)));
        assert_eq!(s, split_indices(10, 0.8, 7).unwrap());
        let s = split_indices(5, 0.8, 1).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (4, 1));
        assert!(matches!(
            split_indices(5, 1.0, 1),
            Err(DataError::InvalidFraction(_))
        ));
        assert!(matches!(
            split_indices(5, 0.0, 1),
            Err(DataError::InvalidFraction(_))
        ));
    }

    #[test]
    fn base_rate_is_group_weighted_mean() {
        let ds = synthesize(101, 3, (0.8, 0.7), 5).unwrap();
        let all = ds.base_rate(GroupSel::All).unwrap();
        let na = ds.group_size(Group::A) as f64;
        let nb = ds.group_size(Group::B) as f64;
        let mix = (na * ds.base_rate(GroupSel::Only(Group::A)).unwrap()
            + nb * ds.base_rate(GroupSel::Only(Group::B)).unwrap())
            / (na + nb);
        assert!((all - mix).abs() < 1e-12);
        assert_eq!(
            ds.group_size(Group::A) + ds.group_size(Group::B),
            ds.n_rows()
        );
    }

    #[test]
    fn synthesize_validates_and_is_deterministic() {
        assert!(synthesize(9, 3, (0.8, 0.7), 1).is_err());
        assert!(synthesize(10, 1, (0.8, 0.7), 1).is_err());
        assert!(synthesize(10, 2, (1.0, 0.7), 1).is_err());
        assert!(synthesize(10, 2, (0.5, 0.0), 1).is_err());
        let a = synthesize(50, 4, (0.9, 0.6), 3).unwrap();
        let b = synthesize(50, 4, (0.9, 0.6), 3).unwrap();
        assert_eq!(a, b);
        let small = synthesize(10, 2, (0.5, 0.5), 0).unwrap();
        for g in Group::BOTH {
            let r = small.base_rate(GroupSel::Only(g)).unwrap();
            assert!(r > 0.0 && r < 1.0);
        }
    }
}
