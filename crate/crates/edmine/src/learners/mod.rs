//! From-scratch explainable classifiers plus the evaluation machinery:
//! stratified cross-validation, grid search and metric reports.

mod cv;
mod folds;
mod forest;
mod metrics;
mod svm;
mod tree;

pub use cv::{cross_validate, grid_search, GridCell, GridSearchResult};
pub use folds::{complement, stratified_kfold};
pub use forest::{train_forest, Forest, ForestParams};
pub use metrics::{compute_metrics, Averaging, Confusion, MetricsReport, MetricsValues};
pub use svm::{train_svm, LinearMarginModel, SvmParams};
pub use tree::{gini, train_tree, DecisionTree, NodeKind, TreeNode, TreeParams};

use serde::{Deserialize, Serialize};

use crate::error::{EdmError, Result};
use crate::features::{EncodedMatrix, EncodingManifest};

/// The three model families compared in experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    Tree,
    Forest,
    Svm,
}

impl ModelFamily {
    pub const ALL: [ModelFamily; 3] = [ModelFamily::Tree, ModelFamily::Forest, ModelFamily::Svm];

    pub fn as_str(&self) -> &'static str {
        match self {
            ModelFamily::Tree => "DT",
            ModelFamily::Forest => "RF",
            ModelFamily::Svm => "SVM",
        }
    }
}

/// A fully specified model to train.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelSpec {
    Tree(TreeParams),
    Forest(ForestParams),
    Svm(SvmParams),
}

impl ModelSpec {
    pub fn family(&self) -> ModelFamily {
        match self {
            ModelSpec::Tree(_) => ModelFamily::Tree,
            ModelSpec::Forest(_) => ModelFamily::Forest,
            ModelSpec::Svm(_) => ModelFamily::Svm,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            ModelSpec::Tree(p) => format!("DT({})", p.describe()),
            ModelSpec::Forest(p) => format!("RF({})", p.describe()),
            ModelSpec::Svm(p) => format!("SVM({})", p.describe()),
        }
    }
}

/// A trained model of any family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrainedModel {
    Tree(DecisionTree),
    Forest(Forest),
    Svm(LinearMarginModel),
}

pub fn train_model(
    spec: &ModelSpec,
    x: &EncodedMatrix,
    y: &[u8],
    seed: u64,
) -> Result<TrainedModel> {
    Ok(match spec {
        ModelSpec::Tree(params) => TrainedModel::Tree(train_tree(x, y, *params)?),
        ModelSpec::Forest(params) => TrainedModel::Forest(train_forest(x, y, *params, seed)?),
        ModelSpec::Svm(params) => TrainedModel::Svm(train_svm(x, y, *params, seed)?),
    })
}

impl TrainedModel {
    pub fn predict(&self, x: &EncodedMatrix) -> Result<Vec<u8>> {
        match self {
            TrainedModel::Tree(m) => m.predict(x),
            TrainedModel::Forest(m) => m.predict(x),
            TrainedModel::Svm(m) => m.predict(x),
        }
    }

    /// Per-encoded-column importance weights. Gini importances for trees and
    /// forests; normalized absolute weights for the margin model.
    pub fn column_importances(&self) -> Vec<f64> {
        match self {
            TrainedModel::Tree(m) => m.gini_importances.clone(),
            TrainedModel::Forest(m) => m.importances.clone(),
            TrainedModel::Svm(m) => {
                let total: f64 = m.weights.iter().map(|w| w.abs()).sum();
                if total > 0.0 {
                    m.weights.iter().map(|w| w.abs() / total).collect()
                } else {
                    vec![0.0; m.weights.len()]
                }
            }
        }
    }

    pub fn columns(&self) -> &[String] {
        match self {
            TrainedModel::Tree(m) => &m.columns,
            TrainedModel::Forest(m) => &m.columns,
            TrainedModel::Svm(m) => &m.columns,
        }
    }
}

/// Re-aggregate per-column importances to their originating specs, so
/// one-hot groups report as one feature. Output follows manifest order.
pub fn feature_importance(
    model: &TrainedModel,
    manifest: &EncodingManifest,
) -> Result<Vec<(String, f64)>> {
    let importances = model.column_importances();
    let columns = model.columns();
    if importances.len() != columns.len() {
        return Err(EdmError::Model("importance/column length mismatch".into()));
    }
    let mut out = Vec::with_capacity(manifest.entries.len());
    for entry in &manifest.entries {
        let mut total = 0.0;
        for output in &entry.outputs {
            if let Some(idx) = columns.iter().position(|c| c == output) {
                total += importances[idx];
            }
        }
        out.push((entry.spec.clone(), total));
    }
    Ok(out)
}

/// Versioned JSON envelope for persisted models.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelDocument {
    pub version: u32,
    pub model: TrainedModel,
}

impl ModelDocument {
    pub fn new(model: TrainedModel) -> Self {
        ModelDocument { version: 1, model }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(text)?;
        if doc.version != 1 {
            return Err(EdmError::Model(format!(
                "unsupported model document version {}",
                doc.version
            )));
        }
        Ok(doc)
    }
}

/// Default tree grid: depth × leaf size, enumerated lexicographically.
pub fn default_tree_grid() -> Vec<ModelSpec> {
    let depths = [Some(2), Some(3), Some(5), Some(10), None];
    let leaves = [1usize, 2, 5];
    let mut grid = Vec::new();
    for depth in depths {
        for leaf in leaves {
            grid.push(ModelSpec::Tree(TreeParams {
                max_depth: depth,
                min_samples_split: 2,
                min_samples_leaf: leaf,
            }));
        }
    }
    grid
}

/// Default forest grid: tree count × depth.
pub fn default_forest_grid() -> Vec<ModelSpec> {
    let counts = [50usize, 100, 200];
    let depths = [Some(2), Some(3), Some(5), Some(10), None];
    let mut grid = Vec::new();
    for n_trees in counts {
        for depth in depths {
            grid.push(ModelSpec::Forest(ForestParams {
                n_trees,
                tree: TreeParams {
                    max_depth: depth,
                    ..Default::default()
                },
                bootstrap: true,
            }));
        }
    }
    grid
}

/// Default margin-model grid over the regularization strength.
pub fn default_svm_grid() -> Vec<ModelSpec> {
    [0.01, 0.1, 1.0, 10.0]
        .iter()
        .map(|&c| ModelSpec::Svm(SvmParams { c, epochs: 60 }))
        .collect()
}

pub fn default_grid(family: ModelFamily) -> Vec<ModelSpec> {
    match family {
        ModelFamily::Tree => default_tree_grid(),
        ModelFamily::Forest => default_forest_grid(),
        ModelFamily::Svm => default_svm_grid(),
    }
}
