//! Greedy wrapper selection around a frozen inner model.

use rayon::prelude::*;

use crate::error::{EdmError, Result};
use crate::features::{standardize, EncodedMatrix};
use crate::learners::{
    cross_validate, feature_importance, train_model, Averaging, ModelSpec, TreeParams,
};
use crate::resample::BalanceSpec;
use crate::seed::derive_seed;

use super::{SelectionMethod, SelectionResult, SelectionStep, StepAction};

/// Inner-model and CV settings shared by all wrapper runs. The model is
/// frozen across steps.
#[derive(Debug, Clone)]
pub struct WrapperConfig {
    pub model: ModelSpec,
    pub balance: BalanceSpec,
    pub folds: usize,
    pub seed: u64,
    pub averaging: Averaging,
}

impl WrapperConfig {
    pub fn new(seed: u64) -> Self {
        WrapperConfig {
            model: ModelSpec::Tree(TreeParams::default()),
            balance: BalanceSpec::default(),
            folds: 10,
            seed,
            averaging: Averaging::Macro,
        }
    }
}

fn units(x: &EncodedMatrix) -> Vec<String> {
    x.manifest
        .entries
        .iter()
        .map(|e| e.spec.clone())
        .collect()
}

fn cv_accuracy(x: &EncodedMatrix, set: &[String], cfg: &WrapperConfig) -> Result<f64> {
    let names: Vec<&str> = set.iter().map(String::as_str).collect();
    let restricted = x.restrict_specs(&names)?;
    let report = cross_validate(
        &restricted,
        &cfg.model,
        &cfg.balance,
        cfg.folds,
        cfg.seed,
        cfg.averaging,
    )?;
    Ok(report.mean.accuracy)
}

/// Greedy forward selection: start empty, at each step add the feature that
/// maximizes CV accuracy, stopping at `k` or when no addition strictly
/// improves. Candidate ties resolve to the lowest manifest index.
pub fn forward_elimination(
    x: &EncodedMatrix,
    cfg: &WrapperConfig,
    k: Option<usize>,
) -> Result<SelectionResult> {
    let all = units(x);
    if all.is_empty() {
        return Err(EdmError::Selection("no features to select from".into()));
    }
    let target = k.unwrap_or(all.len()).min(all.len());
    let mut selected: Vec<String> = Vec::new();
    let mut remaining: Vec<String> = all;
    let mut steps = Vec::new();
    let mut current = f64::NEG_INFINITY;

    while !remaining.is_empty() && selected.len() < target {
        let scored: Vec<(usize, f64)> = remaining
            .par_iter()
            .enumerate()
            .map(|(i, candidate)| {
                let mut grown = selected.clone();
                grown.push(candidate.clone());
                cv_accuracy(x, &grown, cfg).map(|acc| (i, acc))
            })
            .collect::<Result<Vec<_>>>()?;
        // strict > keeps the lowest-index candidate on ties
        let (best_i, best_score) = scored
            .iter()
            .fold((0usize, f64::NEG_INFINITY), |(bi, bs), &(i, s)| {
                if s > bs {
                    (i, s)
                } else {
                    (bi, bs)
                }
            });
        if k.is_none() && best_score <= current && !selected.is_empty() {
            break;
        }
        let feature = remaining.remove(best_i);
        steps.push(SelectionStep {
            feature: feature.clone(),
            score: best_score,
            action: StepAction::Added,
        });
        selected.push(feature);
        current = best_score;
    }

    let chosen_k = Some(selected.len());
    Ok(SelectionResult {
        method: SelectionMethod::Fe,
        selected,
        steps,
        chosen_k,
        feature_scores: Vec::new(),
        flags: Vec::new(),
    })
}

/// Mirror image of forward selection: start full, at each step remove the
/// feature whose removal most improves (or least degrades) CV accuracy,
/// stopping at `k` or when no removal strictly improves.
pub fn backward_elimination(
    x: &EncodedMatrix,
    cfg: &WrapperConfig,
    k: Option<usize>,
) -> Result<SelectionResult> {
    let mut selected = units(x);
    if selected.is_empty() {
        return Err(EdmError::Selection("no features to select from".into()));
    }
    let target = k.unwrap_or(1).max(1);
    let mut steps = Vec::new();
    let mut current = cv_accuracy(x, &selected, cfg)?;

    while selected.len() > target {
        let scored: Vec<(usize, f64)> = (0..selected.len())
            .into_par_iter()
            .map(|i| {
                let mut shrunk = selected.clone();
                shrunk.remove(i);
                cv_accuracy(x, &shrunk, cfg).map(|acc| (i, acc))
            })
            .collect::<Result<Vec<_>>>()?;
        let (best_i, best_score) = scored
            .iter()
            .fold((0usize, f64::NEG_INFINITY), |(bi, bs), &(i, s)| {
                if s > bs {
                    (i, s)
                } else {
                    (bi, bs)
                }
            });
        if k.is_none() && best_score <= current {
            break;
        }
        let feature = selected.remove(best_i);
        steps.push(SelectionStep {
            feature,
            score: best_score,
            action: StepAction::Removed,
        });
        current = best_score;
    }

    let chosen_k = Some(selected.len());
    Ok(SelectionResult {
        method: SelectionMethod::Be,
        selected,
        steps,
        chosen_k,
        feature_scores: Vec::new(),
        flags: Vec::new(),
    })
}

fn train_importances(
    x: &EncodedMatrix,
    set: &[String],
    cfg: &WrapperConfig,
) -> Result<Vec<(String, f64)>> {
    let names: Vec<&str> = set.iter().map(String::as_str).collect();
    let restricted = x.restrict_specs(&names)?;
    let (scaled, _) = standardize(&restricted, None)?;
    let y = scaled.labels_or_err()?.to_vec();
    let model = train_model(&cfg.model, &scaled, &y, derive_seed(cfg.seed, "rfe-model"))?;
    feature_importance(&model, &scaled.manifest)
}

/// Recursive feature elimination: train on the full data, drop the feature
/// with the lowest importance (ties drop the highest manifest index), repeat
/// until `k` remain.
pub fn rfe(x: &EncodedMatrix, cfg: &WrapperConfig, k: usize) -> Result<SelectionResult> {
    let mut selected = units(x);
    let p = selected.len();
    if k < 1 || k > p {
        return Err(EdmError::Selection(format!(
            "k = {k} out of range for {p} features"
        )));
    }
    let mut steps = Vec::new();
    while selected.len() > k {
        let importances = train_importances(x, &selected, cfg)?;
        // lowest importance loses; among ties the highest manifest index drops
        let mut drop_i = 0usize;
        for (i, (_, v)) in importances.iter().enumerate() {
            if *v <= importances[drop_i].1 + 1e-12 {
                drop_i = i;
            }
        }
        let (feature, importance) = importances[drop_i].clone();
        selected.retain(|f| *f != feature);
        steps.push(SelectionStep {
            feature,
            score: importance,
            action: StepAction::Removed,
        });
    }
    Ok(SelectionResult {
        method: SelectionMethod::Rfe,
        selected,
        steps,
        chosen_k: Some(k),
        feature_scores: Vec::new(),
        flags: Vec::new(),
    })
}

/// One point of the RFE-CV curve.
#[derive(Debug, Clone, PartialEq)]
pub struct RfeCvCurvePoint {
    pub k: usize,
    pub mean_accuracy: f64,
    pub std_dev: f64,
}

/// RFE evaluated at every subset size. The elimination order is computed
/// once; each surviving set is scored by CV. The chosen k* is the smallest k
/// whose mean is within one standard error of the best mean.
pub fn rfe_cv(
    x: &EncodedMatrix,
    cfg: &WrapperConfig,
) -> Result<(SelectionResult, Vec<RfeCvCurvePoint>)> {
    let all = units(x);
    let p = all.len();
    if p == 0 {
        return Err(EdmError::Selection("no features to select from".into()));
    }
    // removal order from a full elimination pass
    let full = rfe(x, cfg, 1)?;
    let mut sets: Vec<Vec<String>> = Vec::with_capacity(p);
    // set for k: survivors after p-k removals
    for k in 1..=p {
        let removed: Vec<&str> = full.steps[..p - k].iter().map(|s| s.feature.as_str()).collect();
        let set: Vec<String> = all
            .iter()
            .filter(|f| !removed.contains(&f.as_str()))
            .cloned()
            .collect();
        sets.push(set);
    }

    let curve: Vec<RfeCvCurvePoint> = sets
        .par_iter()
        .enumerate()
        .map(|(i, set)| {
            let names: Vec<&str> = set.iter().map(String::as_str).collect();
            let restricted = x.restrict_specs(&names)?;
            let report = cross_validate(
                &restricted,
                &cfg.model,
                &cfg.balance,
                cfg.folds,
                cfg.seed,
                cfg.averaging,
            )?;
            Ok(RfeCvCurvePoint {
                k: i + 1,
                mean_accuracy: report.mean.accuracy,
                std_dev: report.std_dev.accuracy,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let best = curve
        .iter()
        .max_by(|a, b| {
            a.mean_accuracy
                .partial_cmp(&b.mean_accuracy)
                .expect("finite accuracy")
        })
        .expect("non-empty curve");
    let one_se = best.mean_accuracy - best.std_dev / (cfg.folds as f64).sqrt();
    let k_star = curve
        .iter()
        .find(|pt| pt.mean_accuracy >= one_se)
        .map(|pt| pt.k)
        .unwrap_or(best.k);

    let selected = sets[k_star - 1].clone();
    let result = SelectionResult {
        method: SelectionMethod::RfeCv,
        selected,
        steps: full.steps,
        chosen_k: Some(k_star),
        feature_scores: Vec::new(),
        flags: Vec::new(),
    };
    Ok((result, curve))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{ColumnMeta, EncodingManifest, ManifestEntry, RowTag, SourceCategory};
    use crate::learners::TreeParams;

    fn labeled_matrix(rows: Vec<Vec<f64>>, labels: Vec<u8>) -> EncodedMatrix {
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
            labels: Some(labels),
            learner_ids: (0..n).map(|i| format!("r{i}")).collect(),
            row_tags: (0..n).map(RowTag::source).collect(),
            manifest: EncodingManifest {
                version: 1,
                entries: (0..n_cols)
                    .map(|j| ManifestEntry {
                        spec: format!("f{j}"),
                        category: 'B',
                        kind: "numeric".into(),
                        outputs: vec![format!("f{j}")],
                    })
                    .collect(),
            },
            standardized: false,
        }
    }

    /// 40 rows, f0 exactly determines the label, f1/f2 are noise.
    fn planted() -> EncodedMatrix {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..40 {
            let noise1 = ((i * 37) % 11) as f64;
            let noise2 = ((i * 13) % 7) as f64;
            let signal = if i % 2 == 0 { 1.0 } else { 0.0 };
            rows.push(vec![signal, noise1, noise2]);
            labels.push(signal as u8);
        }
        labeled_matrix(rows, labels)
    }

    fn cfg() -> WrapperConfig {
        let mut cfg = WrapperConfig::new(5);
        cfg.model = ModelSpec::Tree(TreeParams::with_depth(3));
        cfg.folds = 5;
        cfg
    }

    #[test]
    fn fe_picks_the_perfect_feature_first() {
        let x = planted();
        let result = forward_elimination(&x, &cfg(), None).unwrap();
        assert_eq!(result.steps[0].feature, "f0");
        assert!((result.steps[0].score - 100.0).abs() < 1e-9);
    }

    #[test]
    fn be_on_single_feature_stops_immediately() {
        let x = planted();
        let single = x.restrict_specs(&["f0"]).unwrap();
        let result = backward_elimination(&single, &cfg(), None).unwrap();
        assert_eq!(result.selected, vec!["f0".to_string()]);
        assert!(result.steps.is_empty());
    }

    #[test]
    fn fe_and_be_with_full_k_return_everything() {
        let x = planted();
        let fe = forward_elimination(&x, &cfg(), Some(3)).unwrap();
        let be = backward_elimination(&x, &cfg(), Some(3)).unwrap();
        assert_eq!(fe.selected.len(), 3);
        assert_eq!(be.selected.len(), 3);
    }

    #[test]
    fn rfe_identity_at_full_k_and_error_beyond() {
        let x = planted();
        let result = rfe(&x, &cfg(), 3).unwrap();
        assert_eq!(result.selected, vec!["f0", "f1", "f2"]);
        assert!(rfe(&x, &cfg(), 4).is_err());
    }

    #[test]
    fn rfe_keeps_the_planted_feature() {
        let x = planted();
        let result = rfe(&x, &cfg(), 1).unwrap();
        assert_eq!(result.selected, vec!["f0".to_string()]);
    }

    #[test]
    fn rfe_cv_curve_covers_every_k() {
        let x = planted();
        let (result, curve) = rfe_cv(&x, &cfg()).unwrap();
        assert_eq!(curve.len(), 3);
        assert!(result.chosen_k.unwrap() >= 1);
        assert!(result.selected.contains(&"f0".to_string()));
    }

    #[test]
    fn reruns_are_identical() {
        let x = planted();
        let a = forward_elimination(&x, &cfg(), None).unwrap();
        let b = forward_elimination(&x, &cfg(), None).unwrap();
        assert_eq!(a, b);
        let a = backward_elimination(&x, &cfg(), Some(1)).unwrap();
        let b = backward_elimination(&x, &cfg(), Some(1)).unwrap();
        assert_eq!(a, b);
    }
}
