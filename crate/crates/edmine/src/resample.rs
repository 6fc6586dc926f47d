//! Class-balancing techniques for labeled encoded matrices.
//!
//! Four techniques plus identity: minority upsampling (with replacement),
//! majority downsampling (without replacement), both-classes resampling to
//! the rounded midpoint, and SMOTE. All are pure functions of the matrix and
//! a seeded [`BalanceSpec`]; synthetic and duplicated rows keep provenance
//! tags pointing at their source rows so cross-validation can audit leakage.

use rand::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{EdmError, Result};
use crate::features::{EncodedMatrix, RowTag};
use crate::seed::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BalanceTechnique {
    None,
    Upsample,
    Downsample,
    UpAndDown,
    Smote,
}

impl BalanceTechnique {
    pub const ALL: [BalanceTechnique; 5] = [
        BalanceTechnique::None,
        BalanceTechnique::Upsample,
        BalanceTechnique::Downsample,
        BalanceTechnique::UpAndDown,
        BalanceTechnique::Smote,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            BalanceTechnique::None => "none",
            BalanceTechnique::Upsample => "upsample",
            BalanceTechnique::Downsample => "downsample",
            BalanceTechnique::UpAndDown => "up_and_down",
            BalanceTechnique::Smote => "smote",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "none" => Some(BalanceTechnique::None),
            "upsample" | "up" => Some(BalanceTechnique::Upsample),
            "downsample" | "down" => Some(BalanceTechnique::Downsample),
            "up_and_down" | "updown" => Some(BalanceTechnique::UpAndDown),
            "smote" => Some(BalanceTechnique::Smote),
            _ => None,
        }
    }
}

/// Whether balancing runs inside each CV training fold (leakage-free
/// default) or once on the whole dataset before splitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BalanceScope {
    TrainFolds,
    WholeDataset,
}

impl BalanceScope {
    pub fn as_str(&self) -> &'static str {
        match self {
            BalanceScope::TrainFolds => "train_folds",
            BalanceScope::WholeDataset => "whole_dataset",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BalanceSpec {
    pub technique: BalanceTechnique,
    pub seed: u64,
    /// SMOTE neighbor count; must be >= 1 and < minority count.
    pub smote_k: usize,
    pub scope: BalanceScope,
}

impl BalanceSpec {
    pub fn new(technique: BalanceTechnique, seed: u64) -> Self {
        BalanceSpec {
            technique,
            seed,
            smote_k: 5,
            scope: BalanceScope::TrainFolds,
        }
    }

    pub fn with_scope(mut self, scope: BalanceScope) -> Self {
        self.scope = scope;
        self
    }
}

impl Default for BalanceSpec {
    fn default() -> Self {
        BalanceSpec::new(BalanceTechnique::None, 0)
    }
}

fn class_indices(labels: &[u8]) -> (Vec<usize>, Vec<usize>) {
    let mut class0 = Vec::new();
    let mut class1 = Vec::new();
    for (i, &l) in labels.iter().enumerate() {
        if l == 0 {
            class0.push(i);
        } else {
            class1.push(i);
        }
    }
    (class0, class1)
}

/// Rebalance a labeled matrix according to the spec. Identity for
/// [`BalanceTechnique::None`]; all other techniques leave the two classes
/// with equal counts.
pub fn rebalance(x: &EncodedMatrix, spec: &BalanceSpec) -> Result<EncodedMatrix> {
    let labels = x.labels_or_err()?.to_vec();
    let (class0, class1) = class_indices(&labels);
    if class0.is_empty() || class1.is_empty() {
        return Err(EdmError::Resample(format!(
            "both classes must be non-empty (counts {}/{})",
            class0.len(),
            class1.len()
        )));
    }
    if spec.technique == BalanceTechnique::None {
        return Ok(x.clone());
    }
    let mut rng = rng_from_seed(spec.seed);
    let (minority, majority) = if class0.len() <= class1.len() {
        (class0, class1)
    } else {
        (class1, class0)
    };

    match spec.technique {
        BalanceTechnique::None => unreachable!(),
        BalanceTechnique::Upsample => {
            let extra = sample_with_replacement(&minority, majority.len() - minority.len(), &mut rng);
            Ok(append_duplicates(x, &extra))
        }
        BalanceTechnique::Downsample => {
            let kept_majority = sample_without_replacement(&majority, minority.len(), &mut rng);
            let mut keep: Vec<usize> = minority.iter().chain(kept_majority.iter()).copied().collect();
            keep.sort_unstable();
            Ok(x.subset(&keep))
        }
        BalanceTechnique::UpAndDown => {
            let target = ((minority.len() + majority.len()) as f64 / 2.0).round() as usize;
            let kept_majority = if majority.len() > target {
                sample_without_replacement(&majority, target, &mut rng)
            } else {
                majority.clone()
            };
            let mut keep: Vec<usize> = minority.iter().chain(kept_majority.iter()).copied().collect();
            keep.sort_unstable();
            let extra = if minority.len() < target {
                sample_with_replacement(&minority, target - minority.len(), &mut rng)
            } else {
                Vec::new()
            };
            let base = x.subset(&keep);
            // duplicate indices refer to the original matrix; translate
            let mut out = base;
            for &idx in &extra {
                push_duplicate(&mut out, x, idx);
            }
            Ok(out)
        }
        BalanceTechnique::Smote => {
            if spec.smote_k < 1 {
                return Err(EdmError::Resample("smote_k must be >= 1".into()));
            }
            if spec.smote_k >= minority.len() {
                return Err(EdmError::Resample(format!(
                    "smote_k = {} must be smaller than the minority count {}",
                    spec.smote_k,
                    minority.len()
                )));
            }
            smote(x, &minority, majority.len() - minority.len(), spec.smote_k, &mut rng)
        }
    }
}

fn sample_with_replacement(pool: &[usize], n: usize, rng: &mut impl Rng) -> Vec<usize> {
    (0..n).map(|_| pool[rng.gen_range(0..pool.len())]).collect()
}

fn sample_without_replacement(pool: &[usize], n: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut shuffled = pool.to_vec();
    shuffled.shuffle(rng);
    shuffled.truncate(n);
    shuffled
}

fn append_duplicates(x: &EncodedMatrix, extra: &[usize]) -> EncodedMatrix {
    let mut out = x.clone();
    for &idx in extra {
        push_duplicate(&mut out, x, idx);
    }
    out
}

fn push_duplicate(out: &mut EncodedMatrix, source: &EncodedMatrix, idx: usize) {
    out.rows.push(source.rows[idx].clone());
    if let (Some(labels), Some(src)) = (out.labels.as_mut(), source.labels.as_ref()) {
        labels.push(src[idx]);
    }
    out.learner_ids.push(source.learner_ids[idx].clone());
    out.row_tags.push(source.row_tags[idx].clone());
}

fn smote(
    x: &EncodedMatrix,
    minority: &[usize],
    n_synthetic: usize,
    k: usize,
    rng: &mut impl Rng,
) -> Result<EncodedMatrix> {
    // Neighbor distances are measured in standardized space so no column
    // dominates; interpolation happens in the matrix's own space.
    let n_cols = x.n_cols();
    let n_rows = x.n_rows() as f64;
    let mut mean = vec![0.0; n_cols];
    let mut std = vec![0.0; n_cols];
    for j in 0..n_cols {
        let values: Vec<f64> = x.rows.iter().map(|r| r[j]).collect();
        let m = values.iter().sum::<f64>() / n_rows;
        let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n_rows;
        mean[j] = m;
        std[j] = if var > 1e-12 { var.sqrt() } else { 1.0 };
    }
    let z_row = |i: usize| -> Vec<f64> {
        x.rows[i]
            .iter()
            .enumerate()
            .map(|(j, v)| (v - mean[j]) / std[j])
            .collect()
    };
    let z: Vec<Vec<f64>> = minority.iter().map(|&i| z_row(i)).collect();

    // k nearest minority neighbors per minority row (self excluded, ties by
    // position for determinism).
    let mut neighbors: Vec<Vec<usize>> = Vec::with_capacity(minority.len());
    for a in 0..minority.len() {
        let mut dists: Vec<(f64, usize)> = (0..minority.len())
            .filter(|&b| b != a)
            .map(|b| {
                let d = z[a]
                    .iter()
                    .zip(&z[b])
                    .map(|(u, v)| (u - v) * (u - v))
                    .sum::<f64>();
                (d, b)
            })
            .collect();
        dists.sort_by(|l, r| l.partial_cmp(r).expect("finite distances"));
        neighbors.push(dists.into_iter().take(k).map(|(_, b)| b).collect());
    }

    let mut out = x.clone();
    for _ in 0..n_synthetic {
        let a = rng.gen_range(0..minority.len());
        let b = neighbors[a][rng.gen_range(0..k)];
        let u: f64 = rng.gen();
        let (ia, ib) = (minority[a], minority[b]);
        let row: Vec<f64> = x.rows[ia]
            .iter()
            .zip(&x.rows[ib])
            .map(|(va, vb)| va + u * (vb - va))
            .collect();
        out.rows.push(row);
        if let (Some(labels), Some(src)) = (out.labels.as_mut(), x.labels.as_ref()) {
            labels.push(src[ia]);
        }
        out.learner_ids
            .push(format!("{}~{}", x.learner_ids[ia], x.learner_ids[ib]));
        let mut origins = x.row_tags[ia].origins.clone();
        for o in &x.row_tags[ib].origins {
            if !origins.contains(o) {
                origins.push(*o);
            }
        }
        origins.sort_unstable();
        out.row_tags.push(RowTag {
            origins,
            synthetic: true,
        });
    }
    Ok(out)
}

/// Largest distance from any synthetic row to the segment between its two
/// parent rows in `original`. Zero (up to float error) when SMOTE behaves.
pub fn smote_convexity_residual(original: &EncodedMatrix, balanced: &EncodedMatrix) -> f64 {
    let mut worst: f64 = 0.0;
    for (row, tag) in balanced.rows.iter().zip(&balanced.row_tags) {
        if !tag.synthetic {
            continue;
        }
        // A first-generation synthetic row has exactly two origins unless its
        // parents coincide.
        let a = &original.rows[tag.origins[0]];
        let b = &original.rows[*tag.origins.last().expect("tag has origins")];
        let ab_sq: f64 = a.iter().zip(b).map(|(x, y)| (y - x) * (y - x)).sum();
        let residual = if ab_sq <= f64::EPSILON {
            row.iter()
                .zip(a)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt()
        } else {
            let t = row
                .iter()
                .zip(a.iter().zip(b))
                .map(|(r, (x, y))| (r - x) * (y - x))
                .sum::<f64>()
                / ab_sq;
            let t = t.clamp(0.0, 1.0);
            row.iter()
                .zip(a.iter().zip(b))
                .map(|(r, (x, y))| {
                    let p = x + t * (y - x);
                    (r - p) * (r - p)
                })
                .sum::<f64>()
                .sqrt()
        };
        worst = worst.max(residual);
    }
    worst
}

/// Per-class row counts (class 0, class 1).
pub fn class_counts(labels: &[u8]) -> (usize, usize) {
    let ones = labels.iter().filter(|&&l| l == 1).count();
    (labels.len() - ones, ones)
}
