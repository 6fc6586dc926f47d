//! Bagged forest of CART trees.
//!
//! Each tree trains on a bootstrap sample of the full training-set size with
//! ⌈√p⌉ candidate features per split. Prediction is a majority vote with
//! ties to class 0; importances are the mean of the per-tree importances.

use rand::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{EdmError, Result};
use crate::features::EncodedMatrix;
use crate::seed::{derive_seed, rng_from_seed};

use super::tree::{check_columns, DecisionTree, TreeBuilder, TreeParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub tree: TreeParams,
    /// Test hook: `false` trains every tree on the full sample with all
    /// features per split, making a 1-tree forest equal a plain tree.
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            tree: TreeParams::default(),
            bootstrap: true,
        }
    }
}

impl ForestParams {
    pub fn describe(&self) -> String {
        format!("trees={},{}", self.n_trees, self.tree.describe())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<DecisionTree>,
    pub params: ForestParams,
    pub seed: u64,
    pub columns: Vec<String>,
    /// Mean of per-tree normalized importances, per column.
    pub importances: Vec<f64>,
}

pub fn train_forest(
    x: &EncodedMatrix,
    y: &[u8],
    params: ForestParams,
    seed: u64,
) -> Result<Forest> {
    if params.n_trees < 1 {
        return Err(EdmError::Model("forest needs at least one tree".into()));
    }
    if x.n_rows() == 0 {
        return Err(EdmError::Model("cannot train a forest on zero rows".into()));
    }
    if x.n_rows() != y.len() {
        return Err(EdmError::Model(format!(
            "row/label mismatch: {} rows, {} labels",
            x.n_rows(),
            y.len()
        )));
    }
    let columns: Vec<String> = x.columns.iter().map(|c| c.name.clone()).collect();
    let n = x.n_rows();
    let p = x.n_cols();
    let mtry = (p as f64).sqrt().ceil() as usize;

    let mut trees = Vec::with_capacity(params.n_trees);
    for t in 0..params.n_trees {
        let mut rng = rng_from_seed(derive_seed(seed, &format!("tree{t}")));
        let (rows, labels): (Vec<Vec<f64>>, Vec<u8>) = if params.bootstrap {
            let mut rows = Vec::with_capacity(n);
            let mut labels = Vec::with_capacity(n);
            for _ in 0..n {
                let i = rng.gen_range(0..n);
                rows.push(x.rows[i].clone());
                labels.push(y[i]);
            }
            (rows, labels)
        } else {
            (x.rows.clone(), y.to_vec())
        };
        let (split_mtry, split_rng) = if params.bootstrap {
            (Some(mtry), Some(rng))
        } else {
            (None, None)
        };
        let tree = TreeBuilder::new(&rows, &labels, params.tree, split_mtry, split_rng)
            .build(columns.clone())?;
        trees.push(tree);
    }

    let mut importances = vec![0.0; p];
    for tree in &trees {
        for (slot, v) in importances.iter_mut().zip(&tree.gini_importances) {
            *slot += v;
        }
    }
    for v in importances.iter_mut() {
        *v /= trees.len() as f64;
    }

    Ok(Forest {
        trees,
        params,
        seed,
        columns,
        importances,
    })
}

impl Forest {
    pub fn predict(&self, x: &EncodedMatrix) -> Result<Vec<u8>> {
        check_columns(&self.columns, x)?;
        Ok(x.rows
            .iter()
            .map(|row| {
                let votes_one: usize = self
                    .trees
                    .iter()
                    .map(|t| t.predict_row(row) as usize)
                    .sum();
                // tie goes to class 0
                u8::from(votes_one * 2 > self.trees.len())
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::tree::train_tree;
    use crate::features::{ColumnMeta, EncodingManifest, RowTag, SourceCategory};

    fn matrix_from(rows: Vec<Vec<f64>>) -> EncodedMatrix {
        let n_cols = rows.first().map(|r| r.len()).unwrap_or(0);
        let n = rows.len();
        EncodedMatrix {
            columns: (0..n_cols)
                .map(|j| ColumnMeta {
                    name: format!("f{j}"),
                    spec: format!("f{j}"),
                    category: SourceCategory::Behavioral,
                })
                .collect(),
            rows,
            labels: None,
            learner_ids: (0..n).map(|i| format!("r{i}")).collect(),
            row_tags: (0..n).map(RowTag::source).collect(),
            manifest: EncodingManifest::default(),
            standardized: false,
        }
    }

    fn fixture() -> (EncodedMatrix, Vec<u8>) {
        let rows = vec![
            vec![0.0, 3.0],
            vec![1.0, 1.0],
            vec![2.0, 4.0],
            vec![8.0, 1.0],
            vec![9.0, 5.0],
            vec![10.0, 2.0],
        ];
        (matrix_from(rows), vec![0, 0, 0, 1, 1, 1])
    }

    #[test]
    fn degenerate_forest_equals_single_tree() {
        let (x, y) = fixture();
        let params = ForestParams {
            n_trees: 1,
            tree: TreeParams::default(),
            bootstrap: false,
        };
        let forest = train_forest(&x, &y, params, 7).unwrap();
        let tree = train_tree(&x, &y, TreeParams::default()).unwrap();
        assert_eq!(forest.trees[0], tree);
        assert_eq!(forest.predict(&x).unwrap(), tree.predict(&x).unwrap());
    }

    #[test]
    fn same_seed_same_forest() {
        let (x, y) = fixture();
        let params = ForestParams {
            n_trees: 11,
            tree: TreeParams::default(),
            bootstrap: true,
        };
        let a = train_forest(&x, &y, params, 42).unwrap();
        let b = train_forest(&x, &y, params, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_trees_is_an_error() {
        let (x, y) = fixture();
        let params = ForestParams {
            n_trees: 0,
            ..Default::default()
        };
        assert!(train_forest(&x, &y, params, 1).is_err());
    }
}
