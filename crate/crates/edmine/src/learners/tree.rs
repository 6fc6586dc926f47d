//! CART-style binary classification tree.
//!
//! Greedy recursive splitting that minimizes the weighted child Gini
//! impurity. Candidate thresholds are midpoints of consecutive distinct
//! sorted values per feature. Ties between candidate splits resolve to the
//! lowest feature index, then the lowest threshold; growth stops on purity,
//! `max_depth`, or the minimum-sample rules. Leaves predict the majority
//! class, ties going to class 0.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{EdmError, Result};
use crate::features::EncodedMatrix;

/// Two candidate splits whose scores differ by less than this are a tie and
/// resolve by (feature, threshold) order. Far below any score gap real count
/// data can produce, far above accumulated float error.
const SCORE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: Option<u32>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
        }
    }
}

impl TreeParams {
    pub fn with_depth(depth: u32) -> Self {
        TreeParams {
            max_depth: Some(depth),
            ..Default::default()
        }
    }

    /// Short form for provenance strings, e.g. `depth=5,leaf=2`.
    pub fn describe(&self) -> String {
        let depth = self
            .max_depth
            .map(|d| d.to_string())
            .unwrap_or_else(|| "none".into());
        format!(
            "depth={depth},split={},leaf={}",
            self.min_samples_split, self.min_samples_leaf
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum NodeKind {
    Leaf {
        prediction: u8,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub class_counts: [usize; 2],
    pub kind: NodeKind,
}

impl TreeNode {
    pub fn samples(&self) -> usize {
        self.class_counts[0] + self.class_counts[1]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    /// Pre-order node list; index 0 is the root.
    pub nodes: Vec<TreeNode>,
    pub params: TreeParams,
    /// Column names seen at training time; predictions check against them.
    pub columns: Vec<String>,
    /// Normalized total weighted impurity decrease per column. Sums to 1,
    /// or is all zeros for a single-leaf tree.
    pub gini_importances: Vec<f64>,
}

/// Gini impurity `1 − Σ p_c²` of a class-count vector.
pub fn gini(class_counts: &[usize]) -> Result<f64> {
    let n: usize = class_counts.iter().sum();
    if n == 0 {
        return Err(EdmError::Model("gini of all-zero counts".into()));
    }
    let n = n as f64;
    let sum_sq: f64 = class_counts
        .iter()
        .map(|&c| {
            let p = c as f64 / n;
            p * p
        })
        .sum();
    Ok(1.0 - sum_sq)
}

fn gini2(counts: [usize; 2]) -> f64 {
    let n = (counts[0] + counts[1]) as f64;
    let p0 = counts[0] as f64 / n;
    let p1 = counts[1] as f64 / n;
    1.0 - p0 * p0 - p1 * p1
}

struct SplitChoice {
    feature: usize,
    threshold: f64,
    score: f64,
}

pub(crate) struct TreeBuilder<'a> {
    rows: &'a [Vec<f64>],
    y: &'a [u8],
    params: TreeParams,
    n_total: f64,
    nodes: Vec<TreeNode>,
    importance: Vec<f64>,
    /// Features considered per split: all, or a seeded sample of `mtry`.
    mtry: Option<usize>,
    rng: Option<ChaCha8Rng>,
}

impl<'a> TreeBuilder<'a> {
    pub fn new(
        rows: &'a [Vec<f64>],
        y: &'a [u8],
        params: TreeParams,
        mtry: Option<usize>,
        rng: Option<ChaCha8Rng>,
    ) -> Self {
        TreeBuilder {
            rows,
            y,
            params,
            n_total: rows.len() as f64,
            nodes: Vec::new(),
            importance: vec![0.0; rows.first().map(|r| r.len()).unwrap_or(0)],
            mtry,
            rng,
        }
    }

    pub fn build(mut self, columns: Vec<String>) -> Result<DecisionTree> {
        if self.rows.is_empty() {
            return Err(EdmError::Model("cannot train a tree on zero rows".into()));
        }
        let indices: Vec<usize> = (0..self.rows.len()).collect();
        self.grow(&indices, 0);
        let total: f64 = self.importance.iter().sum();
        let gini_importances = if total > 0.0 {
            self.importance.iter().map(|v| v / total).collect()
        } else {
            self.importance.clone()
        };
        Ok(DecisionTree {
            nodes: self.nodes,
            params: self.params,
            columns,
            gini_importances,
        })
    }

    fn grow(&mut self, indices: &[usize], depth: u32) -> usize {
        let mut counts = [0usize; 2];
        for &i in indices {
            counts[self.y[i] as usize] += 1;
        }
        let idx = self.nodes.len();
        self.nodes.push(TreeNode {
            class_counts: counts,
            kind: NodeKind::Leaf {
                prediction: majority(counts),
            },
        });

        let node_gini = gini2(counts);
        let depth_ok = self.params.max_depth.map(|d| depth < d).unwrap_or(true);
        if node_gini <= 0.0 || !depth_ok || indices.len() < self.params.min_samples_split {
            return idx;
        }
        let Some(choice) = self.best_split(indices, counts) else {
            return idx;
        };

        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = indices
            .iter()
            .partition(|&&i| self.rows[i][choice.feature] <= choice.threshold);
        debug_assert!(!left_idx.is_empty() && !right_idx.is_empty());
        if left_idx.is_empty() || right_idx.is_empty() {
            return idx;
        }
        self.importance[choice.feature] +=
            indices.len() as f64 / self.n_total * (node_gini - choice.score);
        let left = self.grow(&left_idx, depth + 1);
        let right = self.grow(&right_idx, depth + 1);
        self.nodes[idx].kind = NodeKind::Split {
            feature: choice.feature,
            threshold: choice.threshold,
            left,
            right,
        };
        idx
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let p = self.importance.len();
        match (self.mtry, self.rng.as_mut()) {
            (Some(m), Some(rng)) if m < p => {
                let mut all: Vec<usize> = (0..p).collect();
                all.shuffle(rng);
                all.truncate(m);
                all.sort_unstable();
                all
            }
            _ => (0..p).collect(),
        }
    }

    fn best_split(&mut self, indices: &[usize], counts: [usize; 2]) -> Option<SplitChoice> {
        let n = indices.len();
        let features = self.candidate_features();
        let mut best: Option<SplitChoice> = None;
        let mut sorted: Vec<(f64, u8)> = Vec::with_capacity(n);
        for feature in features {
            sorted.clear();
            sorted.extend(indices.iter().map(|&i| (self.rows[i][feature], self.y[i])));
            sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite feature values"));
            let mut left = [0usize; 2];
            for cut in 0..n - 1 {
                left[sorted[cut].1 as usize] += 1;
                if sorted[cut].0 == sorted[cut + 1].0 {
                    continue;
                }
                let n_left = cut + 1;
                let n_right = n - n_left;
                if n_left < self.params.min_samples_leaf || n_right < self.params.min_samples_leaf
                {
                    continue;
                }
                let right = [counts[0] - left[0], counts[1] - left[1]];
                let score = (n_left as f64 * gini2(left) + n_right as f64 * gini2(right)) / n as f64;
                // strict improvement only: equal-score candidates keep the
                // earlier (lower feature, lower threshold) choice
                if best.as_ref().map(|b| score < b.score - SCORE_EPS).unwrap_or(true) {
                    // the midpoint of two values one ulp apart rounds up to
                    // the right value; fall back to the left value so the
                    // threshold always separates the groups
                    let mut threshold = (sorted[cut].0 + sorted[cut + 1].0) / 2.0;
                    if threshold >= sorted[cut + 1].0 {
                        threshold = sorted[cut].0;
                    }
                    best = Some(SplitChoice {
                        feature,
                        threshold,
                        score,
                    });
                }
            }
        }
        best
    }
}

fn majority(counts: [usize; 2]) -> u8 {
    // tie goes to class 0 (fail)
    u8::from(counts[1] > counts[0])
}

/// Train a tree on an encoded matrix.
pub fn train_tree(x: &EncodedMatrix, y: &[u8], params: TreeParams) -> Result<DecisionTree> {
    if x.n_rows() != y.len() {
        return Err(EdmError::Model(format!(
            "row/label mismatch: {} rows, {} labels",
            x.n_rows(),
            y.len()
        )));
    }
    TreeBuilder::new(&x.rows, y, params, None, None).build(
        x.columns.iter().map(|c| c.name.clone()).collect(),
    )
}

impl DecisionTree {
    pub fn predict_row(&self, row: &[f64]) -> u8 {
        let mut node = &self.nodes[0];
        loop {
            match &node.kind {
                NodeKind::Leaf { prediction } => return *prediction,
                NodeKind::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if row[*feature] <= *threshold {
                        &self.nodes[*left]
                    } else {
                        &self.nodes[*right]
                    };
                }
            }
        }
    }

    /// Predict labels; the matrix columns must match the training manifest.
    pub fn predict(&self, x: &EncodedMatrix) -> Result<Vec<u8>> {
        check_columns(&self.columns, x)?;
        Ok(x.rows.iter().map(|r| self.predict_row(r)).collect())
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n.kind, NodeKind::Leaf { .. }))
            .count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], idx: usize) -> usize {
            match &nodes[idx].kind {
                NodeKind::Leaf { .. } => 0,
                NodeKind::Split { left, right, .. } => {
                    1 + walk(nodes, *left).max(walk(nodes, *right))
                }
            }
        }
        walk(&self.nodes, 0)
    }
}

pub(crate) fn check_columns(expected: &[String], x: &EncodedMatrix) -> Result<()> {
    let got = x.column_names();
    if expected.len() != got.len() || expected.iter().zip(&got).any(|(a, b)| a != b) {
        return Err(EdmError::Model(format!(
            "column mismatch: model trained on [{}], matrix has [{}]",
            expected.join(", "),
            got.join(", ")
        )));
    }
    Ok(())
}
