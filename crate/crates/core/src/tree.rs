//! CART classification tree grown by recursive binary splitting.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{argmax, Matrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TreeError {
    #[error("impurity of an empty node is undefined")]
    EmptyNode,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

pub type Result<T> = std::result::Result<T, TreeError>;

/// Decreases closer than this are treated as ties.
pub const TIE_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SplitCriterion {
    Gini,
    /// Shannon entropy in bits.
    CrossEntropy,
}

impl SplitCriterion {
    pub fn name(self) -> &'static str {
        match self {
            SplitCriterion::Gini => "gini",
            SplitCriterion::CrossEntropy => "entropy",
        }
    }

    pub fn impurity(self, counts: &[usize]) -> Result<f64> {
        match self {
            SplitCriterion::Gini => gini(counts),
            SplitCriterion::CrossEntropy => entropy(counts),
        }
    }
}

/// `1 - sum p_k^2`
pub fn gini(counts: &[usize]) -> Result<f64> {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return Err(TreeError::EmptyNode);
    }
    let n = n as f64;
    Ok(1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>())
}

/// `-sum p_k log2 p_k`
pub fn entropy(counts: &[usize]) -> Result<f64> {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return Err(TreeError::EmptyNode);
    }
    let n = n as f64;
    Ok(-counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            p * p.log2()
        })
        .sum::<f64>())
}

/// Rows with `feature <= threshold` go left.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitCandidate {
    pub feature_index: usize,
    pub threshold: f64,
    pub impurity_decrease: f64,
}

/// Weighted impurity decrease of splitting `parent` into `left` and the rest.
fn decrease(criterion: SplitCriterion, parent: &[usize], left: &[usize], parent_impurity: f64) -> f64 {
    let n: usize = parent.iter().sum();
    let nl: usize = left.iter().sum();
    let right: Vec<usize> = parent.iter().zip(left).map(|(p, l)| p - l).collect();
    let il = criterion.impurity(left).unwrap_or(0.0);
    let ir = criterion.impurity(&right).unwrap_or(0.0);
    parent_impurity - (nl as f64 / n as f64) * il - ((n - nl) as f64 / n as f64) * ir
}

fn counts_of(labels: impl Iterator<Item = usize>, n_classes: usize) -> Vec<usize> {
    let mut counts = vec![0; n_classes];
    for l in labels {
        counts[l] += 1;
    }
    counts
}

/// Exhaustive search over every feature and every midpoint between
/// consecutive distinct values. Ties go to the lowest feature index, then the
/// lowest threshold. `None` when no split lowers the impurity.
pub fn best_split(x: &Matrix, y: &[usize], criterion: SplitCriterion) -> Option<SplitCandidate> {
    let rows: Vec<usize> = (0..x.rows()).collect();
    let n_classes = y.iter().max().map_or(1, |m| m + 1);
    best_split_rows(x, y, &rows, n_classes, criterion)
}

fn best_split_rows(
    x: &Matrix,
    y: &[usize],
    rows: &[usize],
    n_classes: usize,
    criterion: SplitCriterion,
) -> Option<SplitCandidate> {
    if rows.len() < 2 {
        return None;
    }
    let parent = counts_of(rows.iter().map(|&r| y[r]), n_classes);
    let parent_impurity = criterion.impurity(&parent).ok()?;
    if parent_impurity <= TIE_EPSILON {
        return None;
    }

    let mut best: Option<SplitCandidate> = None;
    let mut order = rows.to_vec();
    for f in 0..x.cols() {
        order.sort_by(|&a, &b| x.get(a, f).total_cmp(&x.get(b, f)));
        let mut left = vec![0; n_classes];
        for i in 0..order.len() - 1 {
            left[y[order[i]]] += 1;
            let (lo, hi) = (x.get(order[i], f), x.get(order[i + 1], f));
            if lo == hi {
                continue;
            }
            let dec = decrease(criterion, &parent, &left, parent_impurity);
            let better = match best {
                None => dec > TIE_EPSILON,
                Some(b) => dec > b.impurity_decrease + TIE_EPSILON,
            };
            if better {
                best = Some(SplitCandidate { feature_index: f, threshold: lo + (hi - lo) / 2.0, impurity_decrease: dec });
            }
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Leaf {
        class_counts: Vec<usize>,
        majority_class: usize,
    },
    Internal {
        split: SplitCandidate,
        /// Counts at this node, kept for inspection dumps.
        class_counts: Vec<usize>,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub criterion: SplitCriterion,
    /// `None` grows until leaves are pure or unsplittable.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self { criterion: SplitCriterion::Gini, max_depth: None, min_samples_split: 2 }
    }
}

fn majority(counts: &[usize]) -> usize {
    let as_f: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    argmax(&as_f)
}

/// Grows a tree over `n_classes` classes (leaf count vectors have this width
/// even if some classes are absent from `y`).
pub fn fit_tree(x: &Matrix, y: &[usize], n_classes: usize, params: &TreeParams) -> Result<TreeNode> {
    if x.rows() != y.len() || y.is_empty() {
        return Err(TreeError::DimensionMismatch(format!("{} feature rows vs {} labels", x.rows(), y.len())));
    }
    if let Some(&bad) = y.iter().find(|&&l| l >= n_classes) {
        return Err(TreeError::DimensionMismatch(format!("label {bad} with only {n_classes} classes")));
    }
    let rows: Vec<usize> = (0..x.rows()).collect();
    Ok(grow(x, y, &rows, n_classes, params, 0))
}

fn grow(x: &Matrix, y: &[usize], rows: &[usize], n_classes: usize, params: &TreeParams, depth: usize) -> TreeNode {
    let counts = counts_of(rows.iter().map(|&r| y[r]), n_classes);
    let leaf = |counts: Vec<usize>| TreeNode::Leaf { majority_class: majority(&counts), class_counts: counts };

    if params.max_depth.is_some_and(|m| depth >= m) || rows.len() < params.min_samples_split.max(2) {
        return leaf(counts);
    }
    let Some(split) = best_split_rows(x, y, rows, n_classes, params.criterion) else {
        return leaf(counts);
    };
    let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| x.get(i, split.feature_index) <= split.threshold);
    TreeNode::Internal {
        split,
        class_counts: counts,
        left: Box::new(grow(x, y, &l, n_classes, params, depth + 1)),
        right: Box::new(grow(x, y, &r, n_classes, params, depth + 1)),
    }
}

impl TreeNode {
    fn leaf_for(&self, row: &[f64]) -> (&[usize], usize) {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { class_counts, majority_class } => return (class_counts, *majority_class),
                TreeNode::Internal { split, left, right, .. } => {
                    node = if row[split.feature_index] <= split.threshold { left } else { right };
                }
            }
        }
    }

    fn max_feature(&self) -> Option<usize> {
        match self {
            TreeNode::Leaf { .. } => None,
            TreeNode::Internal { split, left, right, .. } => {
                [Some(split.feature_index), left.max_feature(), right.max_feature()].into_iter().flatten().max()
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Internal { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn n_leaves(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Internal { left, right, .. } => left.n_leaves() + right.n_leaves(),
        }
    }

    /// Visits every internal split.
    pub fn splits(&self) -> Vec<SplitCandidate> {
        match self {
            TreeNode::Leaf { .. } => Vec::new(),
            TreeNode::Internal { split, left, right, .. } => {
                let mut v = vec![*split];
                v.extend(left.splits());
                v.extend(right.splits());
                v
            }
        }
    }

    /// Indented text dump: one line per node with feature name, threshold and counts.
    pub fn dump(&self, feature_names: &[String]) -> String {
        let mut out = String::new();
        self.dump_into(feature_names, 0, &mut out);
        out
    }

    fn dump_into(&self, names: &[String], indent: usize, out: &mut String) {
        let pad = "  ".repeat(indent);
        match self {
            TreeNode::Leaf { class_counts, majority_class } => {
                let _ = writeln!(out, "{pad}leaf class={majority_class} counts={class_counts:?}");
            }
            TreeNode::Internal { split, class_counts, left, right } => {
                let name = names.get(split.feature_index).cloned().unwrap_or_else(|| format!("x{}", split.feature_index));
                let _ = writeln!(
                    out,
                    "{pad}{name} <= {} (decrease {:.6}) counts={class_counts:?}",
                    split.threshold, split.impurity_decrease
                );
                left.dump_into(names, indent + 1, out);
                right.dump_into(names, indent + 1, out);
            }
        }
    }

    fn check_width(&self, x: &Matrix) -> Result<()> {
        if let Some(f) = self.max_feature() {
            if f >= x.cols() {
                return Err(TreeError::DimensionMismatch(format!(
                    "tree uses feature {f} but input has {} columns",
                    x.cols()
                )));
            }
        }
        Ok(())
    }
}

pub fn predict_tree(t: &TreeNode, x: &Matrix) -> Result<Vec<usize>> {
    t.check_width(x)?;
    Ok((0..x.rows()).map(|r| t.leaf_for(x.row(r)).1).collect())
}

/// Leaf class proportions per row.
pub fn predict_proba(t: &TreeNode, x: &Matrix) -> Result<Matrix> {
    t.check_width(x)?;
    let mut rows = Vec::with_capacity(x.rows());
    for r in 0..x.rows() {
        let (counts, _) = t.leaf_for(x.row(r));
        let n: usize = counts.iter().sum();
        rows.push(counts.iter().map(|&c| c as f64 / n as f64).collect());
    }
    Matrix::from_rows(&rows).map_err(|e| TreeError::DimensionMismatch(e.to_string()))
}
