//! Stratified cross-validation and exhaustive grid search.
//!
//! Per fold: balance the training rows (per the configured scope), fit
//! standardization on the balanced training set only, train, and evaluate on
//! the untouched test fold. With the `train_folds` scope the balanced
//! training set is audited against the test fold through row provenance
//! tags; any overlap is a hard error.

use rayon::prelude::*;

use crate::error::{EdmError, Result};
use crate::features::{standardize, EncodedMatrix};
use crate::resample::{rebalance, BalanceScope, BalanceSpec};
use crate::seed::derive_seed;

use super::folds::{complement, stratified_kfold};
use super::metrics::{compute_metrics, Averaging, Confusion, MetricsReport, MetricsValues};
use super::{train_model, ModelSpec};

/// Evaluate one model spec with k-fold CV.
pub fn cross_validate(
    x: &EncodedMatrix,
    model: &ModelSpec,
    balance: &BalanceSpec,
    k: usize,
    seed: u64,
    averaging: Averaging,
) -> Result<MetricsReport> {
    // Row provenance is audited against this run's own fold indices, so the
    // matrix gets a fresh tag universe regardless of where it was cut from.
    let fresh = x.clone().with_fresh_tags();
    let x = match balance.scope {
        BalanceScope::TrainFolds => fresh,
        BalanceScope::WholeDataset => {
            let mut spec = *balance;
            spec.seed = derive_seed(balance.seed, "whole-dataset");
            rebalance(&fresh, &spec)?
        }
    };
    let x = &x;
    let y = x.labels_or_err()?.to_vec();
    let folds = stratified_kfold(&y, k, derive_seed(seed, "folds"))?;

    let mut fold_metrics = Vec::with_capacity(k);
    let mut confusion_total = Confusion::default();
    let mut flags = Vec::new();
    for (fi, test_idx) in folds.iter().enumerate() {
        let train_idx = complement(test_idx, y.len());
        let train = x.subset(&train_idx);
        let balanced = match balance.scope {
            BalanceScope::TrainFolds => {
                let mut spec = *balance;
                spec.seed = derive_seed(balance.seed, &format!("fold{fi}"));
                let balanced = rebalance(&train, &spec)?;
                audit_leakage(&balanced, test_idx)?;
                balanced
            }
            // already balanced up front
            BalanceScope::WholeDataset => train,
        };
        let (train_std, stats) = standardize(&balanced, None)?;
        let train_labels = train_std.labels_or_err()?.to_vec();
        let fitted = train_model(
            model,
            &train_std,
            &train_labels,
            derive_seed(seed, &format!("model{fi}")),
        )?;
        let (test_std, _) = standardize(&x.subset(test_idx), Some(&stats))?;
        let predictions = fitted.predict(&test_std)?;
        let truth: Vec<u8> = test_idx.iter().map(|&i| y[i]).collect();
        let confusion = Confusion::from_pairs(&truth, &predictions);
        confusion_total.add(&confusion);
        let (values, fold_flags) = compute_metrics(&confusion, averaging)?;
        for flag in fold_flags {
            flags.push(format!("fold{fi}: {flag}"));
        }
        fold_metrics.push(values);
    }

    Ok(MetricsReport::from_folds(
        fold_metrics,
        averaging,
        confusion_total,
        format!("{}/{}", balance.technique.as_str(), balance.scope.as_str()),
        flags,
    ))
}

fn audit_leakage(balanced: &EncodedMatrix, test_idx: &[usize]) -> Result<()> {
    for tag in &balanced.row_tags {
        for origin in &tag.origins {
            if test_idx.binary_search(origin).is_ok() {
                return Err(EdmError::Leakage(format!(
                    "balanced training row derives from test row {origin}"
                )));
            }
        }
    }
    Ok(())
}

/// One grid cell's outcome.
#[derive(Debug, Clone)]
pub struct GridCell {
    pub spec: ModelSpec,
    pub report: MetricsReport,
}

#[derive(Debug, Clone)]
pub struct GridSearchResult {
    pub best: ModelSpec,
    pub best_report: MetricsReport,
    pub cells: Vec<GridCell>,
}

impl GridSearchResult {
    pub fn score_table(&self) -> Vec<(String, MetricsValues)> {
        self.cells
            .iter()
            .map(|c| (c.spec.describe(), c.report.mean))
            .collect()
    }
}

/// Exhaustive evaluation of a grid by cross-validation. Every cell sees the
/// same folds (same seed); the best cell is the highest mean accuracy with
/// ties resolving to the earliest grid point.
pub fn grid_search(
    x: &EncodedMatrix,
    grid: &[ModelSpec],
    balance: &BalanceSpec,
    k: usize,
    seed: u64,
    averaging: Averaging,
) -> Result<GridSearchResult> {
    if grid.is_empty() {
        return Err(EdmError::Model("empty hyperparameter grid".into()));
    }
    let cells: Vec<GridCell> = grid
        .par_iter()
        .map(|spec| {
            cross_validate(x, spec, balance, k, seed, averaging).map(|report| GridCell {
                spec: spec.clone(),
                report,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut best = 0usize;
    for (i, cell) in cells.iter().enumerate() {
        if cell.report.mean.accuracy > cells[best].report.mean.accuracy {
            best = i;
        }
    }
    Ok(GridSearchResult {
        best: cells[best].spec.clone(),
        best_report: cells[best].report.clone(),
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{ColumnMeta, EncodingManifest, RowTag};
    use crate::features::SourceCategory;
    use crate::learners::TreeParams;
    use crate::resample::BalanceTechnique;

    fn labeled(rows: Vec<Vec<f64>>, labels: Vec<u8>) -> EncodedMatrix {
        let n = rows.len();
        EncodedMatrix {
            columns: vec![ColumnMeta {
                name: "f0".into(),
                spec: "f0".into(),
                category: SourceCategory::Behavioral,
            }],
            rows,
            labels: Some(labels),
            learner_ids: (0..n).map(|i| format!("r{i}")).collect(),
            row_tags: (0..n).map(RowTag::source).collect(),
            manifest: EncodingManifest::default(),
            standardized: false,
        }
    }

    #[test]
    fn audit_rejects_tags_that_reach_into_the_test_fold() {
        let mut x = labeled(vec![vec![0.0], vec![1.0], vec![2.0]], vec![0, 1, 1]);
        // row claims descent from original row 5
        x.row_tags[2] = RowTag {
            origins: vec![5],
            synthetic: true,
        };
        assert!(audit_leakage(&x, &[1, 5, 9]).is_err());
        assert!(audit_leakage(&x, &[3, 4]).is_ok());
    }

    #[test]
    fn train_folds_scope_never_trips_the_audit() {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64]).collect();
        let labels: Vec<u8> = (0..30).map(|i| u8::from(i % 2 == 0)).collect();
        let x = labeled(rows, labels);
        for technique in BalanceTechnique::ALL {
            let mut balance = BalanceSpec::new(technique, 8);
            balance.smote_k = 3;
            let spec = ModelSpec::Tree(TreeParams::with_depth(3));
            let result = cross_validate(&x, &spec, &balance, 5, 1, Averaging::Macro);
            assert!(result.is_ok(), "{technique:?}: {result:?}");
        }
    }

    #[test]
    fn whole_dataset_scope_is_recorded_in_the_report() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
        let labels: Vec<u8> = (0..20).map(|i| u8::from(i < 8)).collect();
        let x = labeled(rows, labels);
        let balance = BalanceSpec::new(BalanceTechnique::Upsample, 3)
            .with_scope(BalanceScope::WholeDataset);
        let spec = ModelSpec::Tree(TreeParams::with_depth(2));
        let report = cross_validate(&x, &spec, &balance, 4, 1, Averaging::Macro).unwrap();
        assert_eq!(report.balance, "upsample/whole_dataset");
    }
}
