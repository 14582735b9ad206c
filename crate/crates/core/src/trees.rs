//! Binary-classification CART trees, bagged forests, and impurity-reduction
//! feature importance.
//!
//! Impurity is Gini. Split gains are computed exactly from integer class
//! counts, so candidate splits compare without rounding and per-tree
//! importances regroup exactly. Importance sums raw gains per feature; the
//! sample-weighted variant is available through [`ImportanceMode::Weighted`].

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::pipeline::{ImportanceVector, PipelineError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TreeError {
    #[error("dataset has {rows} rows but {targets} target labels")]
    ShapeMismatch { rows: usize, targets: usize },
    #[error("row {row} has {got} values, expected {expected}")]
    RaggedRow {
        row: usize,
        got: usize,
        expected: usize,
    },
    #[error("dataset needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("non-finite value at row {row}, column {column}")]
    NonFiniteValue { row: usize, column: usize },
    #[error("label {label} at row {row} is not 0 or 1")]
    InvalidLabel { row: usize, label: u8 },
    #[error("node has no samples")]
    EmptyNode,
    #[error("child counts {left} + {right} do not add up to parent count {parent}")]
    CountMismatch { parent: u64, left: u64, right: u64 },
    #[error("ensemble needs at least one tree")]
    NoTrees,
    #[error(transparent)]
    Importance(#[from] PipelineError),
}

/// Feature matrix with a binary target.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    feature_names: Vec<String>,
    rows: Vec<Vec<f64>>,
    target: Vec<u8>,
}

impl Dataset {
    pub fn new(
        feature_names: Vec<String>,
        rows: Vec<Vec<f64>>,
        target: Vec<u8>,
    ) -> Result<Self, TreeError> {
        if rows.len() != target.len() {
            return Err(TreeError::ShapeMismatch {
                rows: rows.len(),
                targets: target.len(),
            });
        }
        if rows.len() < 2 {
            return Err(TreeError::TooFewSamples(rows.len()));
        }
        for (r, row) in rows.iter().enumerate() {
            if row.len() != feature_names.len() {
                return Err(TreeError::RaggedRow {
                    row: r,
                    got: row.len(),
                    expected: feature_names.len(),
                });
            }
            if let Some(c) = row.iter().position(|v| !v.is_finite()) {
                return Err(TreeError::NonFiniteValue { row: r, column: c });
            }
        }
        if let Some((r, &label)) = target.iter().enumerate().find(|(_, &l)| l > 1) {
            return Err(TreeError::InvalidLabel { row: r, label });
        }
        Ok(Self {
            feature_names,
            rows,
            target,
        })
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn n_samples(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn target(&self) -> &[u8] {
        &self.target
    }

    pub fn column(&self, feature: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[feature]).collect()
    }
}

/// Number of samples of each class at a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ClassCounts {
    pub negative: u64,
    pub positive: u64,
}

impl ClassCounts {
    pub fn new(negative: u64, positive: u64) -> Self {
        Self { negative, positive }
    }

    pub fn total(&self) -> u64 {
        self.negative + self.positive
    }

    fn add(&mut self, label: u8) {
        if label == 0 {
            self.negative += 1;
        } else {
            self.positive += 1;
        }
    }

    fn sub(&self, other: &Self) -> Self {
        Self::new(
            self.negative - other.negative,
            self.positive - other.positive,
        )
    }

    fn is_pure(&self) -> bool {
        self.negative == 0 || self.positive == 0
    }
}

/// `1 - p0^2 - p1^2`.
pub fn gini_impurity(counts: ClassCounts) -> Result<f64, TreeError> {
    let n = counts.total();
    if n == 0 {
        return Err(TreeError::EmptyNode);
    }
    let p0 = counts.negative as f64 / n as f64;
    let p1 = counts.positive as f64 / n as f64;
    Ok(1.0 - p0 * p0 - p1 * p1)
}

/// Impurity of a split: children's impurities weighted by their sample share.
pub fn weighted_child_impurity(
    parent_count: u64,
    left: (u64, f64),
    right: (u64, f64),
) -> Result<f64, TreeError> {
    if left.0 == 0 || right.0 == 0 || left.0 + right.0 != parent_count {
        return Err(TreeError::CountMismatch {
            parent: parent_count,
            left: left.0,
            right: right.0,
        });
    }
    let n = parent_count as f64;
    Ok(left.0 as f64 / n * left.1 + right.0 as f64 / n * right.1)
}

/// Impurity reduction `I(n) - I'(n)`.
pub fn split_gain(
    node_impurity: f64,
    parent_count: u64,
    left: (u64, f64),
    right: (u64, f64),
) -> Result<f64, TreeError> {
    Ok(node_impurity - weighted_child_impurity(parent_count, left, right)?)
}

fn big(v: u64) -> BigInt {
    BigInt::from(v)
}

/// Gini impurity as an exact rational: `2ab / n^2`.
fn exact_gini(c: ClassCounts) -> BigRational {
    let n = c.total();
    BigRational::new(big(2) * big(c.negative) * big(c.positive), big(n) * big(n))
}

/// Exact impurity reduction of splitting `parent` into `left` and `right`.
pub fn exact_split_gain(parent: ClassCounts, left: ClassCounts, right: ClassCounts) -> BigRational {
    let n = BigRational::from_integer(big(parent.total()));
    let wl = BigRational::from_integer(big(left.total())) / &n;
    let wr = BigRational::from_integer(big(right.total())) / &n;
    exact_gini(parent) - wl * exact_gini(left) - wr * exact_gini(right)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitNode {
    pub feature: usize,
    /// Samples with `value <= threshold` go left.
    pub threshold: f64,
    pub samples: u64,
    pub impurity: f64,
    pub class_counts: ClassCounts,
    /// Exact impurity reduction of this split.
    pub gain: BigRational,
    pub left: Box<TreeNode>,
    pub right: Box<TreeNode>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeafNode {
    pub samples: u64,
    pub impurity: f64,
    pub class_counts: ClassCounts,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Split(SplitNode),
    Leaf(LeafNode),
}

impl TreeNode {
    pub fn samples(&self) -> u64 {
        match self {
            TreeNode::Split(s) => s.samples,
            TreeNode::Leaf(l) => l.samples,
        }
    }

    pub fn impurity(&self) -> f64 {
        match self {
            TreeNode::Split(s) => s.impurity,
            TreeNode::Leaf(l) => l.impurity,
        }
    }

    pub fn class_counts(&self) -> ClassCounts {
        match self {
            TreeNode::Split(s) => s.class_counts,
            TreeNode::Leaf(l) => l.class_counts,
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, TreeNode::Leaf(_))
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Split(s) => 1 + s.left.depth().max(s.right.depth()),
            TreeNode::Leaf(_) => 0,
        }
    }

    /// Internal nodes in pre-order.
    pub fn splits(&self) -> Vec<&SplitNode> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(node) = stack.pop() {
            if let TreeNode::Split(s) = node {
                out.push(s);
                stack.push(&s.right);
                stack.push(&s.left);
            }
        }
        out
    }

    /// Fraction of positive samples in the leaf reached by `row`.
    pub fn predict_proba(&self, row: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Split(s) => {
                    node = if row[s.feature] <= s.threshold {
                        &s.left
                    } else {
                        &s.right
                    };
                }
                TreeNode::Leaf(l) => {
                    return l.class_counts.positive as f64 / l.samples.max(1) as f64;
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeParams {
    pub max_depth: usize,
    /// Nodes with fewer samples become leaves.
    pub min_samples_split: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: 6,
            min_samples_split: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ForestParams {
    pub trees: usize,
    pub tree: TreeParams,
    /// Tree `t` draws its bootstrap sample from a ChaCha8 stream seeded with
    /// `seed + t` (wrapping).
    pub seed: u64,
    pub bootstrap: bool,
    pub parallel: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            trees: 100,
            tree: TreeParams::default(),
            seed: 0,
            bootstrap: true,
            parallel: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeEnsemble {
    pub trees: Vec<TreeNode>,
    pub params: ForestParams,
    pub feature_names: Vec<String>,
}

struct Candidate {
    feature: usize,
    threshold: f64,
    left: ClassCounts,
    right: ClassCounts,
    // Weighted child impurity up to a constant factor:
    // (aL*bL*nR + aR*bR*nL) / (nL*nR).
    score_num: u128,
    score_den: u128,
}

impl Candidate {
    fn new(feature: usize, threshold: f64, left: ClassCounts, right: ClassCounts) -> Self {
        let (nl, nr) = (left.total() as u128, right.total() as u128);
        let l = left.negative as u128 * left.positive as u128;
        let r = right.negative as u128 * right.positive as u128;
        Self {
            feature,
            threshold,
            left,
            right,
            score_num: l * nr + r * nl,
            score_den: nl * nr,
        }
    }

    fn beats(&self, other: &Candidate) -> bool {
        self.score_num * other.score_den < other.score_num * self.score_den
    }
}

fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo * 0.5 + hi * 0.5;
    // Adjacent floats: the midpoint rounds onto `hi`, which would send it left.
    if m >= hi {
        lo
    } else {
        m
    }
}

/// Best split of the samples in `idx`, scanning features in index order and
/// thresholds in ascending order; only a strictly better split replaces the
/// current best.
fn best_split(data: &Dataset, idx: &[usize], counts: ClassCounts) -> Option<Candidate> {
    let mut best: Option<Candidate> = None;
    let mut column: Vec<(f64, u8)> = Vec::with_capacity(idx.len());
    for feature in 0..data.n_features() {
        column.clear();
        column.extend(idx.iter().map(|&i| (data.rows[i][feature], data.target[i])));
        column.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut left = ClassCounts::default();
        for k in 0..column.len() - 1 {
            left.add(column[k].1);
            let (lo, hi) = (column[k].0, column[k + 1].0);
            if lo == hi {
                continue;
            }
            let cand = Candidate::new(feature, midpoint(lo, hi), left, counts.sub(&left));
            if best.as_ref().is_none_or(|b| cand.beats(b)) {
                best = Some(cand);
            }
        }
    }
    best
}

fn leaf(counts: ClassCounts) -> TreeNode {
    TreeNode::Leaf(LeafNode {
        samples: counts.total(),
        impurity: gini_impurity(counts).unwrap_or(0.0),
        class_counts: counts,
    })
}

fn grow(data: &Dataset, idx: &[usize], depth: usize, params: &TreeParams) -> TreeNode {
    let mut counts = ClassCounts::default();
    for &i in idx {
        counts.add(data.target[i]);
    }
    if depth >= params.max_depth || idx.len() < params.min_samples_split || counts.is_pure() {
        return leaf(counts);
    }
    let Some(best) = best_split(data, idx, counts) else {
        return leaf(counts);
    };
    let gain = exact_split_gain(counts, best.left, best.right);
    if gain <= BigRational::zero() {
        return leaf(counts);
    }

    let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = idx
        .iter()
        .partition(|&&i| data.rows[i][best.feature] <= best.threshold);
    TreeNode::Split(SplitNode {
        feature: best.feature,
        threshold: best.threshold,
        samples: counts.total(),
        impurity: gini_impurity(counts).unwrap_or(0.0),
        class_counts: counts,
        gain,
        left: Box::new(grow(data, &left_idx, depth + 1, params)),
        right: Box::new(grow(data, &right_idx, depth + 1, params)),
    })
}

/// Greedy CART induction on every row of `data`.
pub fn train_tree(data: &Dataset, params: &TreeParams) -> TreeNode {
    let idx: Vec<usize> = (0..data.n_samples()).collect();
    grow(data, &idx, 0, params)
}

fn bootstrap_indices(n: usize, seed: u64, tree_index: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(tree_index as u64));
    (0..n).map(|_| rng.gen_range(0..n)).collect()
}

/// Trains `params.trees` trees, each on its own bootstrap resample when
/// bootstrapping is enabled. Serial and parallel training give identical
/// ensembles.
pub fn train_forest(data: &Dataset, params: &ForestParams) -> Result<TreeEnsemble, TreeError> {
    if params.trees == 0 {
        return Err(TreeError::NoTrees);
    }
    let n = data.n_samples();
    let fit = |t: usize| {
        let idx: Vec<usize> = if params.bootstrap {
            bootstrap_indices(n, params.seed, t)
        } else {
            (0..n).collect()
        };
        grow(data, &idx, 0, &params.tree)
    };
    let trees = if params.parallel {
        (0..params.trees).into_par_iter().map(fit).collect()
    } else {
        (0..params.trees).map(fit).collect()
    };
    Ok(TreeEnsemble {
        trees,
        params: *params,
        feature_names: data.feature_names.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ImportanceMode {
    /// Sum of raw impurity reductions.
    #[default]
    Unweighted,
    /// Each reduction scaled by the node's share of the tree's samples.
    Weighted,
}

/// Exact per-feature sum of split gains for one tree.
pub fn tree_importance_exact(
    tree: &TreeNode,
    n_features: usize,
    mode: ImportanceMode,
) -> Vec<BigRational> {
    let mut out = vec![BigRational::zero(); n_features];
    let root = tree.samples().max(1);
    for s in tree.splits() {
        let contribution = match mode {
            ImportanceMode::Unweighted => s.gain.clone(),
            ImportanceMode::Weighted => &s.gain * BigRational::new(big(s.samples), big(root)),
        };
        out[s.feature] += contribution;
    }
    out
}

pub fn tree_importance(tree: &TreeNode, n_features: usize, mode: ImportanceMode) -> Vec<f64> {
    tree_importance_exact(tree, n_features, mode)
        .iter()
        .map(|v| v.to_f64().unwrap_or(0.0))
        .collect()
}

/// Mean of the per-tree importances, named after the training features.
pub fn ensemble_importance(
    ensemble: &TreeEnsemble,
    mode: ImportanceMode,
) -> Result<ImportanceVector, TreeError> {
    if ensemble.trees.is_empty() {
        return Err(TreeError::NoTrees);
    }
    let n_features = ensemble.feature_names.len();
    let mut sum = vec![BigRational::zero(); n_features];
    for tree in &ensemble.trees {
        for (acc, v) in sum
            .iter_mut()
            .zip(tree_importance_exact(tree, n_features, mode))
        {
            *acc += v;
        }
    }
    let count = BigRational::from_integer(big(ensemble.trees.len() as u64));
    let values = sum
        .into_iter()
        .map(|v| (v / &count).to_f64().unwrap_or(0.0));
    Ok(ImportanceVector::new(
        ensemble.feature_names.iter().cloned().zip(values),
    )?)
}
