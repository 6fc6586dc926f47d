//! Linear margin classifier trained by seeded subgradient descent.
//!
//! Minimizes `0.5·‖w‖² + C · Σ_i hinge(y_i (w·x_i + b))` over standardized
//! inputs, labels mapped internally to {−1, +1}. One pass visits every
//! sample in a seeded shuffle; the step at global step t is `1/(λt)` with
//! λ = 1, the strong-convexity modulus of the regularizer. The returned
//! model is the running average of the iterates, which is what converges
//! for subgradient methods; the objective of that average is logged per
//! epoch.

use rand::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{EdmError, Result};
use crate::features::EncodedMatrix;
use crate::seed::rng_from_seed;

use super::tree::check_columns;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    pub epochs: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams { c: 1.0, epochs: 60 }
    }
}

impl SvmParams {
    pub fn describe(&self) -> String {
        format!("C={},epochs={}", self.c, self.epochs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearMarginModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub params: SvmParams,
    pub seed: u64,
    pub columns: Vec<String>,
    /// Objective of the averaged iterate, one entry per epoch.
    pub epoch_objectives: Vec<f64>,
    pub final_objective: f64,
}

/// Full objective at (w, b).
fn objective(rows: &[Vec<f64>], targets: &[f64], w: &[f64], b: f64, c: f64) -> f64 {
    let reg = 0.5 * w.iter().map(|v| v * v).sum::<f64>();
    let hinge: f64 = rows
        .iter()
        .zip(targets)
        .map(|(row, &t)| {
            let margin = t * (dot(w, row) + b);
            (1.0 - margin).max(0.0)
        })
        .sum();
    reg + c * hinge
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn train_svm(x: &EncodedMatrix, y: &[u8], params: SvmParams, seed: u64) -> Result<LinearMarginModel> {
    if !x.standardized {
        return Err(EdmError::Model(
            "margin model requires standardized inputs; run standardize first".into(),
        ));
    }
    if x.n_rows() == 0 || x.n_rows() != y.len() {
        return Err(EdmError::Model(format!(
            "row/label mismatch: {} rows, {} labels",
            x.n_rows(),
            y.len()
        )));
    }
    if params.c < 0.0 {
        return Err(EdmError::Model("C must be non-negative".into()));
    }

    let n = x.n_rows();
    let p = x.n_cols();
    let targets: Vec<f64> = y.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();

    let mut rng = rng_from_seed(seed);
    let mut w = vec![0.0f64; p];
    let mut b = 0.0f64;
    let mut w_avg = vec![0.0f64; p];
    let mut b_avg = 0.0f64;
    let mut steps = 0usize;
    let mut order: Vec<usize> = (0..n).collect();
    let mut epoch_objectives = Vec::with_capacity(params.epochs);

    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            steps += 1;
            let eta = 1.0 / steps as f64;
            let margin = targets[i] * (dot(&w, &x.rows[i]) + b);
            // w ← (1−η)w [+ η·C·n·y·x on violation]; the per-sample loss is
            // scaled by n so the stochastic subgradient is unbiased for the
            // sum-form objective.
            let keep = 1.0 - eta;
            for v in w.iter_mut() {
                *v *= keep;
            }
            if margin < 1.0 {
                let coef = eta * params.c * n as f64 * targets[i];
                for (v, xi) in w.iter_mut().zip(&x.rows[i]) {
                    *v += coef * xi;
                }
                b += eta * params.c * n as f64 * targets[i];
            }
            let t = steps as f64;
            for (avg, v) in w_avg.iter_mut().zip(&w) {
                *avg += (*v - *avg) / t;
            }
            b_avg += (b - b_avg) / t;
        }
        epoch_objectives.push(objective(&x.rows, &targets, &w_avg, b_avg, params.c));
    }

    let final_objective = *epoch_objectives
        .last()
        .expect("at least one epoch required");
    Ok(LinearMarginModel {
        weights: w_avg,
        bias: b_avg,
        params,
        seed,
        columns: x.columns.iter().map(|c| c.name.clone()).collect(),
        epoch_objectives,
        final_objective,
    })
}

impl LinearMarginModel {
    pub fn decision(&self, row: &[f64]) -> f64 {
        dot(&self.weights, row) + self.bias
    }

    pub fn predict(&self, x: &EncodedMatrix) -> Result<Vec<u8>> {
        check_columns(&self.columns, x)?;
        Ok(x.rows
            .iter()
            .map(|r| u8::from(self.decision(r) > 0.0))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{ColumnMeta, EncodingManifest, RowTag, SourceCategory};

    fn standardized_matrix(rows: Vec<Vec<f64>>) -> EncodedMatrix {
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
            standardized: true,
        }
    }

    #[test]
    fn separable_pair_is_classified() {
        let x = standardized_matrix(vec![vec![-1.0], vec![1.0]]);
        let y = vec![0, 1];
        let model = train_svm(&x, &y, SvmParams { c: 1.0, epochs: 80 }, 3).unwrap();
        assert_eq!(model.predict(&x).unwrap(), y);
    }

    #[test]
    fn zero_c_degenerates_to_constant_prediction() {
        let x = standardized_matrix(vec![vec![-1.0], vec![0.0], vec![1.0]]);
        let y = vec![0, 1, 1];
        let model = train_svm(&x, &y, SvmParams { c: 0.0, epochs: 20 }, 3).unwrap();
        assert!(model.weights.iter().all(|w| w.abs() < 1e-9));
        let preds = model.predict(&x).unwrap();
        assert!(preds.windows(2).all(|w| w[0] == w[1]), "not constant: {preds:?}");
    }

    #[test]
    fn averaged_objective_trends_down() {
        let x = standardized_matrix(vec![
            vec![-1.3, 0.2],
            vec![-0.9, -0.4],
            vec![-1.1, 0.9],
            vec![1.0, -0.2],
            vec![1.2, 0.5],
            vec![0.8, -0.8],
        ]);
        let y = vec![0, 0, 0, 1, 1, 1];
        let model = train_svm(&x, &y, SvmParams { c: 1.0, epochs: 50 }, 11).unwrap();
        let objs = &model.epoch_objectives;
        assert!(objs.last().unwrap() <= &objs[0], "{objs:?}");
        // trend check: each epoch average at most a hair above the previous
        let violations = objs
            .windows(2)
            .filter(|w| w[1] > w[0] + 1e-9)
            .count();
        assert!(
            violations * 10 <= objs.len(),
            "averaged objective rose in {violations} of {} epochs",
            objs.len()
        );
    }

    #[test]
    fn unstandardized_input_is_rejected() {
        let mut x = standardized_matrix(vec![vec![-1.0], vec![1.0]]);
        x.standardized = false;
        assert!(train_svm(&x, &[0, 1], SvmParams::default(), 1).is_err());
    }

    #[test]
    fn same_seed_same_model() {
        let x = standardized_matrix(vec![vec![-1.0, 0.5], vec![1.0, -0.5], vec![0.3, 1.0]]);
        let y = vec![0, 1, 1];
        let a = train_svm(&x, &y, SvmParams::default(), 5).unwrap();
        let b = train_svm(&x, &y, SvmParams::default(), 5).unwrap();
        assert_eq!(a, b);
    }
}
