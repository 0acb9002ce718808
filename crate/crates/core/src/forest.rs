//! Bagged decision-tree ensemble with inference over incomplete inputs.
//!
//! Trees are grown on full feature vectors (Gini splits on bootstrap samples).
//! At prediction time an observation may reveal any subset of its features.
//! Traversal follows the split predicate at nodes whose feature is observed,
//! and descends into both children at nodes whose feature is not, weighting
//! each child by its share of the node's training mass. A tree's score is the
//! weighted average of the purities of all leaves reached; the forest score
//! is the plain mean over trees.
//!
//! Leaf purities are Laplace smoothed, `(pos + s) / (n + 2s)`. The same `s`
//! pseudo-positive and `s` pseudo-negative instances are counted in the leaf
//! mass that drives the branch weights, so a node's mass is
//! `n_train + 2s * leaves_below`. This keeps the model a consistent mixture:
//! with nothing observed, a tree scores exactly its smoothed training base
//! rate `(P + sL) / (N + 2sL)`.

use std::path::{Path, PathBuf};

use fixedbitset::FixedBitSet;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{ColumnKind, Dataset};

const FORMAT: &str = "activefair-forest";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ForestError {
    #[error("invalid forest config: {0}")]
    InvalidConfig(String),
    #[error("invalid tree: {0}")]
    InvalidTree(String),
    #[error("forest file: {0}")]
    Format(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features sampled per split; `None` means `ceil(sqrt(d))`.
    pub mtry: Option<usize>,
    pub bootstrap: bool,
    pub leaf_smoothing: f64,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            max_depth: 8,
            min_leaf: 5,
            mtry: None,
            bootstrap: true,
            leaf_smoothing: 1.0,
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn resolved_mtry(&self, d: usize) -> usize {
        self.mtry
            .unwrap_or_else(|| (d as f64).sqrt().ceil() as usize)
    }

    fn validate(&self, d: usize) -> Result<(), ForestError> {
        let mtry = self.resolved_mtry(d);
        if self.n_trees == 0 {
            return Err(ForestError::InvalidConfig("n_trees must be >= 1".into()));
        }
        if self.min_leaf == 0 {
            return Err(ForestError::InvalidConfig("min_leaf must be >= 1".into()));
        }
        if mtry == 0 || mtry > d {
            return Err(ForestError::InvalidConfig(format!(
                "mtry {mtry} outside [1, {d}]"
            )));
        }
        if !(self.leaf_smoothing >= 0.0 && self.leaf_smoothing.is_finite()) {
            return Err(ForestError::InvalidConfig(
                "leaf_smoothing must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Split test of an internal node. Matching values go to the left child.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predicate {
    /// Numeric: `x <= threshold`.
    LessEq(f64),
    /// Categorical: `x == code`.
    Equals(u32),
}

impl Predicate {
    #[inline]
    pub fn goes_left(self, x: f64) -> bool {
        match self {
            Predicate::LessEq(t) => x <= t,
            Predicate::Equals(c) => x == f64::from(c),
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Predicate::LessEq(t) => t,
            Predicate::Equals(c) => f64::from(c),
        }
    }
}

/// Tree node in a flat array; children always sit at larger indices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        predicate: Predicate,
        left: usize,
        right: usize,
        n_train: u64,
        n_positive: u64,
    },
    Leaf {
        n_train: u64,
        n_positive: u64,
    },
}

impl Node {
    pub fn n_train(&self) -> u64 {
        match *self {
            Node::Split { n_train, .. } | Node::Leaf { n_train, .. } => n_train,
        }
    }

    pub fn n_positive(&self) -> u64 {
        match *self {
            Node::Split { n_positive, .. } | Node::Leaf { n_positive, .. } => n_positive,
        }
    }
}

/// A feature vector of which only the acquired entries may be read.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialObservation {
    values: Vec<f64>,
    mask: FixedBitSet,
}

impl PartialObservation {
    /// Nothing acquired yet; `values` holds the answers that acquisition reveals.
    pub fn empty(values: &[f64]) -> Self {
        PartialObservation {
            values: values.to_vec(),
            mask: FixedBitSet::with_capacity(values.len()),
        }
    }

    pub fn full(values: &[f64]) -> Self {
        let mut obs = Self::empty(values);
        obs.mask.insert_range(..);
        obs
    }

    pub fn with_features(values: &[f64], acquired: impl IntoIterator<Item = usize>) -> Self {
        let mut obs = Self::empty(values);
        for j in acquired {
            obs.acquire(j);
        }
        obs
    }

    pub fn n_features(&self) -> usize {
        self.values.len()
    }

    pub fn acquire(&mut self, j: usize) {
        self.mask.insert(j);
    }

    pub fn is_acquired(&self, j: usize) -> bool {
        self.mask.contains(j)
    }

    pub fn mask(&self) -> &FixedBitSet {
        &self.mask
    }

    pub fn acquired(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask.ones()
    }

    /// Number of acquired features.
    pub fn budget(&self) -> usize {
        self.mask.count_ones(..)
    }

    pub fn is_complete(&self) -> bool {
        self.budget() == self.values.len()
    }

    pub fn value(&self, j: usize) -> Option<f64> {
        self.is_acquired(j).then(|| self.values[j])
    }

    /// Copy with feature `j` acquired and answered by `value`.
    pub fn with_hypothetical(&self, j: usize, value: f64) -> Self {
        let mut obs = self.clone();
        obs.values[j] = value;
        obs.acquire(j);
        obs
    }
}

/// A single fitted tree plus cached quantities for fast marginal inference.
#[derive(Debug, Clone)]
pub struct Tree {
    nodes: Vec<Node>,
    smoothing: f64,
    mass: Vec<f64>,
    marginal: Vec<f64>,
    uses: Vec<FixedBitSet>,
}

impl PartialEq for Tree {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes && self.smoothing == other.smoothing
    }
}

impl Tree {
    /// Validates a node array (root at index 0) and derives inference caches.
    pub fn new(nodes: Vec<Node>, n_features: usize, smoothing: f64) -> Result<Tree, ForestError> {
        let bad = |msg: String| Err(ForestError::InvalidTree(msg));
        if nodes.is_empty() {
            return bad("no nodes".into());
        }
        let mut parents = vec![0usize; nodes.len()];
        for (i, node) in nodes.iter().enumerate() {
            match *node {
                Node::Leaf {
                    n_train,
                    n_positive,
                } => {
                    if n_train == 0 || n_positive > n_train {
                        return bad(format!("leaf {i}: {n_positive} positives of {n_train}"));
                    }
                }
                Node::Split {
                    feature,
                    predicate,
                    left,
                    right,
                    n_train,
                    n_positive,
                } => {
                    if feature >= n_features {
                        return bad(format!("node {i}: feature {feature} >= {n_features}"));
                    }
                    if !predicate.value().is_finite() {
                        return bad(format!("node {i}: non-finite predicate"));
                    }
                    if left <= i
                        || right <= i
                        || left >= nodes.len()
                        || right >= nodes.len()
                        || left == right
                    {
                        return bad(format!("node {i}: bad children {left}, {right}"));
                    }
                    parents[left] += 1;
                    parents[right] += 1;
                    let (l, r) = (&nodes[left], &nodes[right]);
                    if l.n_train() + r.n_train() != n_train
                        || l.n_positive() + r.n_positive() != n_positive
                    {
                        return bad(format!("node {i}: child counts do not add up"));
                    }
                }
            }
        }
        if parents[0] != 0 || parents[1..].iter().any(|&p| p != 1) {
            return bad("nodes do not form a single tree".into());
        }

        let len = nodes.len();
        let mut leaves = vec![0u64; len];
        let mut mass = vec![0.0; len];
        let mut marginal = vec![0.0; len];
        let mut uses = vec![FixedBitSet::with_capacity(n_features); len];
        for i in (0..len).rev() {
            match nodes[i] {
                Node::Leaf {
                    n_train,
                    n_positive,
                } => {
                    leaves[i] = 1;
                    mass[i] = n_train as f64 + 2.0 * smoothing;
                    marginal[i] = (n_positive as f64 + smoothing) / mass[i];
                }
                Node::Split {
                    feature,
                    left,
                    right,
                    n_train,
                    ..
                } => {
                    leaves[i] = leaves[left] + leaves[right];
                    mass[i] = n_train as f64 + 2.0 * smoothing * leaves[i] as f64;
                    let (ml, mr) = (mass[left], mass[right]);
                    marginal[i] = (ml * marginal[left] + mr * marginal[right]) / (ml + mr);
                    let mut u = uses[left].clone();
                    u.union_with(&uses[right]);
                    u.insert(feature);
                    uses[i] = u;
                }
            }
        }
        Ok(Tree {
            nodes,
            smoothing,
            mass,
            marginal,
            uses,
        })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Smoothed purity of a leaf.
    pub fn purity(&self, leaf: usize) -> f64 {
        match self.nodes[leaf] {
            Node::Leaf {
                n_train,
                n_positive,
            } => (n_positive as f64 + self.smoothing) / (n_train as f64 + 2.0 * self.smoothing),
            Node::Split { .. } => panic!("node {leaf} is not a leaf"),
        }
    }

    /// Training rows (with bootstrap multiplicity) that reached the root.
    pub fn n_train(&self) -> u64 {
        self.nodes[0].n_train()
    }

    pub fn n_positive(&self) -> u64 {
        self.nodes[0].n_positive()
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    /// `(P + sL) / (N + 2sL)`: the score of this tree with nothing observed.
    pub fn smoothed_base_rate(&self) -> f64 {
        let s_l = self.smoothing * self.n_leaves() as f64;
        (self.n_positive() as f64 + s_l) / (self.n_train() as f64 + 2.0 * s_l)
    }

    pub fn uses_feature(&self, j: usize) -> bool {
        self.uses[0].contains(j)
    }

    /// Probability of the positive class given the acquired features of `obs`.
    pub fn score(&self, obs: &PartialObservation) -> f64 {
        self.score_at(0, obs)
    }

    fn score_at(&self, i: usize, obs: &PartialObservation) -> f64 {
        if self.uses[i].is_disjoint(&obs.mask) {
            return self.marginal[i];
        }
        match self.nodes[i] {
            Node::Leaf { .. } => self.marginal[i],
            Node::Split {
                feature,
                predicate,
                left,
                right,
                ..
            } => {
                if obs.is_acquired(feature) {
                    let next = if predicate.goes_left(obs.values[feature]) {
                        left
                    } else {
                        right
                    };
                    self.score_at(next, obs)
                } else {
                    let (ml, mr) = (self.mass[left], self.mass[right]);
                    (ml * self.score_at(left, obs) + mr * self.score_at(right, obs)) / (ml + mr)
                }
            }
        }
    }

    /// Every leaf reached by `obs` with its traversal weight.
    pub fn reached_leaves(&self, obs: &PartialObservation) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        let mut stack = vec![(0usize, 1.0f64)];
        while let Some((i, w)) = stack.pop() {
            match self.nodes[i] {
                Node::Leaf { .. } => out.push((i, w)),
                Node::Split {
                    feature,
                    predicate,
                    left,
                    right,
                    ..
                } => {
                    if obs.is_acquired(feature) {
                        let next = if predicate.goes_left(obs.values[feature]) {
                            left
                        } else {
                            right
                        };
                        stack.push((next, w));
                    } else {
                        let (ml, mr) = (self.mass[left], self.mass[right]);
                        stack.push((right, w * mr / (ml + mr)));
                        stack.push((left, w * ml / (ml + mr)));
                    }
                }
            }
        }
        out
    }

    /// Classical single-path prediction on a complete feature vector.
    pub fn predict_full(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { .. } => return self.purity(i),
                Node::Split {
                    feature,
                    predicate,
                    left,
                    right,
                    ..
                } => {
                    i = if predicate.goes_left(row[feature]) {
                        left
                    } else {
                        right
                    }
                }
            }
        }
    }

    /// Total decrease in (count-weighted) Gini impurity per feature.
    fn impurity_decrease(&self, out: &mut [f64]) {
        let gini = |n: u64, p: u64| 2.0 * p as f64 * (n - p) as f64 / n as f64;
        for node in &self.nodes {
            if let Node::Split {
                feature,
                left,
                right,
                n_train,
                n_positive,
                ..
            } = *node
            {
                let (l, r) = (&self.nodes[left], &self.nodes[right]);
                out[feature] += gini(n_train, n_positive)
                    - gini(l.n_train(), l.n_positive())
                    - gini(r.n_train(), r.n_positive());
            }
        }
    }
}

/// Bagged tree ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    trees: Vec<Tree>,
    config: ForestConfig,
    feature_kinds: Vec<ColumnKind>,
    importances: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ForestFile {
    format: String,
    version: u32,
    feature_kinds: Vec<ColumnKind>,
    config: ForestConfig,
    importances: Vec<f64>,
    trees: Vec<Vec<Node>>,
}

impl Forest {
    /// Assembles a forest from node arrays. Importances are recomputed from
    /// the node counts.
    pub fn from_trees(
        trees: Vec<Vec<Node>>,
        feature_kinds: Vec<ColumnKind>,
        config: ForestConfig,
    ) -> Result<Forest, ForestError> {
        let d = feature_kinds.len();
        if d == 0 {
            return Err(ForestError::InvalidConfig("no features".into()));
        }
        if trees.len() != config.n_trees {
            return Err(ForestError::InvalidConfig(format!(
                "{} trees given, config says {}",
                trees.len(),
                config.n_trees
            )));
        }
        let trees = trees
            .into_iter()
            .map(|nodes| Tree::new(nodes, d, config.leaf_smoothing))
            .collect::<Result<Vec<_>, _>>()?;
        for tree in &trees {
            for node in tree.nodes() {
                if let Node::Split {
                    feature, predicate, ..
                } = node
                {
                    let ok = matches!(
                        (feature_kinds[*feature], predicate),
                        (ColumnKind::Numeric, Predicate::LessEq(_))
                            | (ColumnKind::Categorical, Predicate::Equals(_))
                    );
                    if !ok {
                        return Err(ForestError::InvalidTree(format!(
                            "predicate {predicate:?} does not match the kind of feature {feature}"
                        )));
                    }
                }
            }
        }
        let mut importances = vec![0.0; d];
        for tree in &trees {
            tree.impurity_decrease(&mut importances);
        }
        let total: f64 = importances.iter().sum();
        if total > 0.0 {
            importances.iter_mut().for_each(|v| *v /= total);
        } else {
            importances.iter_mut().for_each(|v| *v = 1.0 / d as f64);
        }
        Ok(Forest {
            trees,
            config,
            feature_kinds,
            importances,
        })
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn config(&self) -> &ForestConfig {
        &self.config
    }

    pub fn n_features(&self) -> usize {
        self.feature_kinds.len()
    }

    pub fn feature_kinds(&self) -> &[ColumnKind] {
        &self.feature_kinds
    }

    /// True when no tree has a split (e.g. a single-class training set).
    pub fn is_constant(&self) -> bool {
        self.trees.iter().all(|t| t.nodes.len() == 1)
    }

    /// Mean over trees of the marginalized tree scores.
    pub fn predict_partial(&self, obs: &PartialObservation) -> f64 {
        self.trees.iter().map(|t| t.score(obs)).sum::<f64>() / self.trees.len() as f64
    }

    /// Classical forest prediction on a complete feature vector.
    pub fn predict_full(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict_full(row)).sum::<f64>() / self.trees.len() as f64
    }

    /// Normalized mean decrease in Gini impurity; sums to 1.
    pub fn importances(&self) -> &[f64] {
        &self.importances
    }

    /// Features by descending importance; ties by ascending index.
    pub fn feature_importance(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.n_features()).collect();
        order.sort_by(|&a, &b| {
            self.importances[b]
                .total_cmp(&self.importances[a])
                .then(a.cmp(&b))
        });
        order
    }

    pub fn uses_feature(&self, j: usize) -> bool {
        self.trees.iter().any(|t| t.uses_feature(j))
    }

    /// Sorted distinct split values (thresholds or codes) used on feature `j`.
    pub fn split_values(&self, j: usize) -> Vec<f64> {
        let mut v: Vec<f64> = self
            .trees
            .iter()
            .flat_map(|t| t.nodes.iter())
            .filter_map(|n| match *n {
                Node::Split {
                    feature, predicate, ..
                } if feature == j => Some(predicate.value()),
                _ => None,
            })
            .collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }

    pub fn to_json(&self) -> String {
        let file = ForestFile {
            format: FORMAT.into(),
            version: FORMAT_VERSION,
            feature_kinds: self.feature_kinds.clone(),
            config: self.config.clone(),
            importances: self.importances.clone(),
            trees: self.trees.iter().map(|t| t.nodes.clone()).collect(),
        };
        serde_json::to_string(&file).expect("forest serializes")
    }

    pub fn from_json(text: &str) -> Result<Forest, ForestError> {
        let file: ForestFile =
            serde_json::from_str(text).map_err(|e| ForestError::Format(e.to_string()))?;
        if file.format != FORMAT || file.version != FORMAT_VERSION {
            return Err(ForestError::Format(format!(
                "unsupported format {} v{}",
                file.format, file.version
            )));
        }
        Forest::from_trees(file.trees, file.feature_kinds, file.config)
    }

    pub fn save(&self, path: &Path) -> Result<(), ForestError> {
        std::fs::write(path, self.to_json()).map_err(|source| ForestError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Forest, ForestError> {
        let text = std::fs::read_to_string(path).map_err(|source| ForestError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Forest::from_json(&text)
    }
}

/// Trains a forest on a fully observed dataset.
///
/// Each tree draws from its own ChaCha stream `(seed, tree index)`, so the
/// result does not depend on how trees are scheduled across threads.
pub fn train(data: &Dataset, config: &ForestConfig) -> Result<Forest, ForestError> {
    let d = data.n_features();
    config.validate(d)?;
    let grower = Grower {
        data,
        kinds: data.feature_kinds(),
        config,
        mtry: config.resolved_mtry(d),
    };
    let trees: Vec<Vec<Node>> = (0..config.n_trees)
        .into_par_iter()
        .map(|t| grower.grow(t as u64))
        .collect();
    Forest::from_trees(trees, data.feature_kinds(), config.clone())
}

struct Grower<'a> {
    data: &'a Dataset,
    kinds: Vec<ColumnKind>,
    config: &'a ForestConfig,
    mtry: usize,
}

struct Candidate {
    impurity: f64,
    feature: usize,
    predicate: Predicate,
}

/// `n * gini(p)` for a node with `n` rows of which `pos` are positive.
fn weighted_gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        2.0 * pos as f64 * (n - pos) as f64 / n as f64
    }
}

impl Grower<'_> {
    fn grow(&self, tree_index: u64) -> Vec<Node> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(tree_index);
        let n = self.data.n_rows();
        let sample: Vec<usize> = if self.config.bootstrap {
            (0..n).map(|_| rng.random_range(0..n)).collect()
        } else {
            (0..n).collect()
        };
        let mut nodes = Vec::new();
        self.build(&mut nodes, sample, 0, &mut rng);
        nodes
    }

    fn build(
        &self,
        nodes: &mut Vec<Node>,
        rows: Vec<usize>,
        depth: usize,
        rng: &mut ChaCha8Rng,
    ) -> usize {
        let labels = self.data.labels();
        let n = rows.len();
        let pos = rows.iter().filter(|&&i| labels[i] == 1).count();
        let slot = nodes.len();
        nodes.push(Node::Leaf {
            n_train: n as u64,
            n_positive: pos as u64,
        });
        if depth >= self.config.max_depth || pos == 0 || pos == n || n < 2 * self.config.min_leaf {
            return slot;
        }
        let Some(best) = self.best_split(&rows, pos, rng) else {
            return slot;
        };
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&i| best.predicate.goes_left(self.data.value(i, best.feature)));
        let left = self.build(nodes, left_rows, depth + 1, rng);
        let right = self.build(nodes, right_rows, depth + 1, rng);
        nodes[slot] = Node::Split {
            feature: best.feature,
            predicate: best.predicate,
            left,
            right,
            n_train: n as u64,
            n_positive: pos as u64,
        };
        slot
    }

    fn best_split(&self, rows: &[usize], pos: usize, rng: &mut ChaCha8Rng) -> Option<Candidate> {
        let d = self.data.n_features();
        let mut features = index::sample(rng, d, self.mtry).into_vec();
        features.sort_unstable();
        let labels = self.data.labels();
        let n = rows.len();
        let min_leaf = self.config.min_leaf;
        let mut best: Option<Candidate> = None;
        let mut consider = |impurity: f64, feature: usize, predicate: Predicate| {
            // Iteration order is (feature, threshold) ascending, so only a
            // strictly better impurity may replace the incumbent.
            if best.as_ref().is_none_or(|b| impurity < b.impurity - 1e-9) {
                best = Some(Candidate {
                    impurity,
                    feature,
                    predicate,
                });
            }
        };

        for &j in &features {
            match self.kinds[j] {
                ColumnKind::Numeric => {
                    let mut pairs: Vec<(f64, u8)> = rows
                        .iter()
                        .map(|&i| (self.data.value(i, j), labels[i]))
                        .collect();
                    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
                    let mut left_pos = 0usize;
                    for k in 0..n - 1 {
                        left_pos += usize::from(pairs[k].1);
                        let (lo, hi) = (pairs[k].0, pairs[k + 1].0);
                        let left_n = k + 1;
                        if lo == hi || left_n < min_leaf || n - left_n < min_leaf {
                            continue;
                        }
                        let mut threshold = lo + (hi - lo) / 2.0;
                        if threshold >= hi {
                            threshold = lo;
                        }
                        let imp = weighted_gini(left_pos, left_n)
                            + weighted_gini(pos - left_pos, n - left_n);
                        consider(imp, j, Predicate::LessEq(threshold));
                    }
                }
                ColumnKind::Categorical => {
                    let mut counts: std::collections::BTreeMap<u32, (usize, usize)> =
                        Default::default();
                    for &i in rows {
                        let e = counts.entry(self.data.value(i, j) as u32).or_default();
                        e.0 += 1;
                        e.1 += usize::from(labels[i]);
                    }
                    for (&code, &(cn, cpos)) in &counts {
                        if cn < min_leaf || n - cn < min_leaf {
                            continue;
                        }
                        let imp = weighted_gini(cpos, cn) + weighted_gini(pos - cpos, n - cn);
                        consider(imp, j, Predicate::Equals(code));
                    }
                }
            }
        }
        best.filter(|b| weighted_gini(pos, n) - b.impurity > 1e-12)
    }
}
