//! Numeric encoding of feature matrices.
//!
//! Numeric and ordinal columns pass through (named ordinal levels map to
//! their position), categorical specs expand to one indicator column per
//! level, and the gender column is dropped from prediction inputs. The
//! encoding manifest records how each spec maps to output columns so that
//! importances can be re-aggregated and one-hot groups selected atomically.

use serde::{Deserialize, Serialize};

use crate::error::{EdmError, Result};
use crate::features::build::LabelPolicy;
use crate::features::{build, names};
use crate::ingest::DatasetBundle;

use super::{FeatureKind, FeatureMatrix, FeatureValue, SourceCategory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMeta {
    pub name: String,
    /// Name of the originating feature spec.
    pub spec: String,
    pub category: SourceCategory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub spec: String,
    pub category: char,
    pub kind: String,
    pub outputs: Vec<String>,
}

/// Mapping from original specs to encoded columns; serializes to JSON.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EncodingManifest {
    pub version: u32,
    pub entries: Vec<ManifestEntry>,
}

impl EncodingManifest {
    pub fn entry(&self, spec: &str) -> Option<&ManifestEntry> {
        self.entries.iter().find(|e| e.spec == spec)
    }

    pub fn spec_names(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.spec.as_str()).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}

/// Where an encoded row came from, for leakage auditing. `origins` holds row
/// indices of the matrix the row was derived from; resampled duplicates keep
/// one origin, synthetic rows keep their parents'.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowTag {
    pub origins: Vec<usize>,
    pub synthetic: bool,
}

impl RowTag {
    pub fn source(i: usize) -> Self {
        RowTag {
            origins: vec![i],
            synthetic: false,
        }
    }
}

/// Dense numeric matrix with labels, per-column metadata and row provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedMatrix {
    pub columns: Vec<ColumnMeta>,
    pub rows: Vec<Vec<f64>>,
    pub labels: Option<Vec<u8>>,
    pub learner_ids: Vec<String>,
    pub row_tags: Vec<RowTag>,
    pub manifest: EncodingManifest,
    /// Set by [`standardize`]; checked by scale-sensitive consumers.
    pub standardized: bool,
}

impl EncodedMatrix {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn labels_or_err(&self) -> Result<&[u8]> {
        self.labels
            .as_deref()
            .ok_or_else(|| EdmError::Feature("matrix carries no labels".into()))
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn column_values(&self, idx: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[idx]).collect()
    }

    /// Row subset; provenance tags carry over from the selected rows.
    pub fn subset(&self, indices: &[usize]) -> EncodedMatrix {
        EncodedMatrix {
            columns: self.columns.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: self
                .labels
                .as_ref()
                .map(|l| indices.iter().map(|&i| l[i]).collect()),
            learner_ids: indices
                .iter()
                .map(|&i| self.learner_ids[i].clone())
                .collect(),
            row_tags: indices.iter().map(|&i| self.row_tags[i].clone()).collect(),
            manifest: self.manifest.clone(),
            standardized: self.standardized,
        }
    }

    /// Keep only the columns encoded from the named specs, in manifest
    /// order. One-hot groups travel as a unit.
    pub fn restrict_specs(&self, specs: &[&str]) -> Result<EncodedMatrix> {
        let mut keep: Vec<usize> = Vec::new();
        let mut entries = Vec::new();
        for entry in &self.manifest.entries {
            if !specs.contains(&entry.spec.as_str()) {
                continue;
            }
            entries.push(entry.clone());
            for output in &entry.outputs {
                let idx = self.column_index(output).ok_or_else(|| {
                    EdmError::Feature(format!("manifest column `{output}` absent from matrix"))
                })?;
                keep.push(idx);
            }
        }
        for name in specs {
            if self.manifest.entry(name).is_none() {
                return Err(EdmError::Feature(format!(
                    "spec `{name}` not present in encoding manifest"
                )));
            }
        }
        Ok(self.keep_columns(&keep, entries))
    }

    /// Keep only columns whose spec belongs to one of the given categories.
    pub fn project_categories(&self, categories: &[SourceCategory]) -> EncodedMatrix {
        let mut keep = Vec::new();
        let mut entries = Vec::new();
        for entry in &self.manifest.entries {
            let cat = SourceCategory::parse(entry.category).expect("manifest category");
            if !categories.contains(&cat) {
                continue;
            }
            entries.push(entry.clone());
            for output in &entry.outputs {
                if let Some(idx) = self.column_index(output) {
                    keep.push(idx);
                }
            }
        }
        self.keep_columns(&keep, entries)
    }

    fn keep_columns(&self, keep: &[usize], entries: Vec<ManifestEntry>) -> EncodedMatrix {
        EncodedMatrix {
            columns: keep.iter().map(|&i| self.columns[i].clone()).collect(),
            rows: self
                .rows
                .iter()
                .map(|r| keep.iter().map(|&i| r[i]).collect())
                .collect(),
            labels: self.labels.clone(),
            learner_ids: self.learner_ids.clone(),
            row_tags: self.row_tags.clone(),
            manifest: EncodingManifest {
                version: self.manifest.version,
                entries,
            },
            standardized: self.standardized,
        }
    }

    /// Reset provenance so each row is its own origin. Used when a matrix
    /// enters a new evaluation protocol.
    pub fn with_fresh_tags(mut self) -> EncodedMatrix {
        self.row_tags = (0..self.rows.len()).map(RowTag::source).collect();
        self
    }
}

/// Encoding policy; the default drops gender from prediction inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodePolicy {
    pub drop: Vec<String>,
}

impl Default for EncodePolicy {
    fn default() -> Self {
        EncodePolicy {
            drop: vec![names::GENDER.to_string()],
        }
    }
}

/// Encode a complete feature matrix to dense numbers.
///
/// Preconditions: no missing values and no quarantined rows (run
/// `filter_complete` first). Unseen categorical levels are fatal.
pub fn encode(matrix: &FeatureMatrix, policy: &EncodePolicy) -> Result<EncodedMatrix> {
    if !matrix.quarantine.is_empty() {
        return Err(EdmError::Feature(format!(
            "matrix still carries {} quarantine flags; run filter_complete first",
            matrix.quarantine.len()
        )));
    }
    let labels = match &matrix.labels {
        Some(l) => {
            let mut out = Vec::with_capacity(l.len());
            for v in l {
                match v {
                    Some(b) => out.push(*b),
                    None => {
                        return Err(EdmError::Feature(
                            "matrix has unlabeled rows; run filter_complete first".into(),
                        ))
                    }
                }
            }
            Some(out)
        }
        None => None,
    };

    let mut columns: Vec<ColumnMeta> = Vec::new();
    let mut entries: Vec<ManifestEntry> = Vec::new();
    let mut encoders: Vec<(usize, Encoder)> = Vec::new();

    for (j, spec) in matrix.specs.iter().enumerate() {
        if policy.drop.contains(&spec.name) {
            continue;
        }
        let (encoder, outputs) = match &spec.kind {
            FeatureKind::Numeric | FeatureKind::Ordinal { levels: None } => {
                (Encoder::Passthrough, vec![spec.name.clone()])
            }
            FeatureKind::Ordinal {
                levels: Some(levels),
            } => (
                Encoder::OrdinalLevels(levels.clone()),
                vec![spec.name.clone()],
            ),
            FeatureKind::Categorical { levels } => {
                let outputs: Vec<String> = levels
                    .iter()
                    .map(|l| format!("{}={l}", spec.name))
                    .collect();
                (Encoder::OneHot(levels.clone()), outputs)
            }
        };
        for name in &outputs {
            columns.push(ColumnMeta {
                name: name.clone(),
                spec: spec.name.clone(),
                category: spec.category,
            });
        }
        entries.push(ManifestEntry {
            spec: spec.name.clone(),
            category: spec.category.code(),
            kind: spec.kind.describe(),
            outputs,
        });
        encoders.push((j, encoder));
    }

    let mut rows = Vec::with_capacity(matrix.rows.len());
    for (i, raw) in matrix.rows.iter().enumerate() {
        let mut row = Vec::with_capacity(columns.len());
        for (j, encoder) in &encoders {
            let value = &raw[*j];
            let spec = &matrix.specs[*j];
            match (encoder, value) {
                (_, FeatureValue::Missing) => {
                    return Err(EdmError::Feature(format!(
                        "row {i} ({}) has missing `{}`; run filter_complete first",
                        matrix.learner_ids[i], spec.name
                    )))
                }
                (Encoder::Passthrough, FeatureValue::Num(v)) => row.push(*v),
                (Encoder::Passthrough, FeatureValue::Cat(s)) => {
                    return Err(EdmError::Feature(format!(
                        "numeric spec `{}` holds categorical value `{s}`",
                        spec.name
                    )))
                }
                (Encoder::OrdinalLevels(levels), FeatureValue::Cat(s)) => {
                    let pos = levels.iter().position(|l| l == s).ok_or_else(|| {
                        EdmError::Feature(format!(
                            "unseen level `{s}` for ordinal spec `{}`",
                            spec.name
                        ))
                    })?;
                    row.push(pos as f64);
                }
                (Encoder::OrdinalLevels(_), FeatureValue::Num(v)) => row.push(*v),
                (Encoder::OneHot(levels), FeatureValue::Cat(s)) => {
                    let pos = levels.iter().position(|l| l == s).ok_or_else(|| {
                        EdmError::Feature(format!(
                            "unseen level `{s}` for categorical spec `{}`",
                            spec.name
                        ))
                    })?;
                    for k in 0..levels.len() {
                        row.push(if k == pos { 1.0 } else { 0.0 });
                    }
                }
                (Encoder::OneHot(_), FeatureValue::Num(v)) => {
                    return Err(EdmError::Feature(format!(
                        "categorical spec `{}` holds numeric value `{v}`",
                        spec.name
                    )))
                }
            }
        }
        rows.push(row);
    }

    let n = rows.len();
    Ok(EncodedMatrix {
        columns,
        rows,
        labels,
        learner_ids: matrix.learner_ids.clone(),
        row_tags: (0..n).map(RowTag::source).collect(),
        manifest: EncodingManifest {
            version: 1,
            entries,
        },
        standardized: false,
    })
}

enum Encoder {
    Passthrough,
    OrdinalLevels(Vec<String>),
    OneHot(Vec<String>),
}

/// Per-column standardization statistics (population convention).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub name: String,
    pub mean: f64,
    pub std: f64,
    pub zero_variance: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizeStats {
    pub columns: Vec<ColumnStats>,
}

impl StandardizeStats {
    pub fn zero_variance_columns(&self) -> Vec<&str> {
        self.columns
            .iter()
            .filter(|c| c.zero_variance)
            .map(|c| c.name.as_str())
            .collect()
    }
}

const VARIANCE_EPS: f64 = 1e-12;

/// Z-score each column with freshly fitted stats, or with provided stats on
/// the transfer/test path. Zero-variance columns pass through unscaled and
/// are flagged.
pub fn standardize(
    matrix: &EncodedMatrix,
    fit: Option<&StandardizeStats>,
) -> Result<(EncodedMatrix, StandardizeStats)> {
    let stats = match fit {
        Some(stats) => {
            if stats.columns.len() != matrix.n_cols() {
                return Err(EdmError::Feature(format!(
                    "standardization stats cover {} columns, matrix has {}",
                    stats.columns.len(),
                    matrix.n_cols()
                )));
            }
            for (c, s) in matrix.columns.iter().zip(&stats.columns) {
                if c.name != s.name {
                    return Err(EdmError::Feature(format!(
                        "standardization stats column `{}` does not match matrix column `{}`",
                        s.name, c.name
                    )));
                }
            }
            stats.clone()
        }
        None => {
            let n = matrix.n_rows().max(1) as f64;
            let columns = matrix
                .columns
                .iter()
                .enumerate()
                .map(|(j, c)| {
                    let values = matrix.column_values(j);
                    let mean = values.iter().sum::<f64>() / n;
                    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                    let std = var.sqrt();
                    ColumnStats {
                        name: c.name.clone(),
                        mean,
                        std,
                        zero_variance: var <= VARIANCE_EPS,
                    }
                })
                .collect();
            StandardizeStats { columns }
        }
    };

    let rows = matrix
        .rows
        .iter()
        .map(|r| {
            r.iter()
                .zip(&stats.columns)
                .map(|(v, s)| {
                    if s.zero_variance {
                        *v
                    } else {
                        (*v - s.mean) / s.std
                    }
                })
                .collect()
        })
        .collect();

    let mut out = matrix.clone();
    out.rows = rows;
    out.standardized = true;
    Ok((out, stats))
}

/// Align the three datasets on their shared columns: age, education level
/// and interaction count, z-scored within each dataset, labeled and filtered
/// to complete rows.
pub fn common_feature_view(
    bundles: &[&DatasetBundle],
    policy: &LabelPolicy,
) -> Result<Vec<EncodedMatrix>> {
    if bundles.len() < 2 {
        return Err(EdmError::Feature(
            "common feature view needs at least two bundles".into(),
        ));
    }
    let mut out = Vec::with_capacity(bundles.len());
    for bundle in bundles {
        let matrix = build::build_common_features(bundle)?;
        let labels = build::derive_labels(bundle, policy)?;
        let (complete, _removed) = matrix.with_labels(&labels).filter_complete();
        if complete.n_rows() == 0 {
            return Err(EdmError::Feature(format!(
                "bundle {} has no complete rows for the common view",
                bundle.dataset_id
            )));
        }
        let encoded = encode(&complete, &EncodePolicy::default())?;
        let (scaled, _stats) = standardize(&encoded, None)?;
        out.push(scaled);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{
        build_minimal_features, derive_labels, names, FeatureKind, FeatureMatrix, FeatureSpec,
        FeatureValue,
    };
    use crate::synthgen::{generate_bundle, PlantSpec};

    fn small_matrix() -> FeatureMatrix {
        let specs = vec![
            FeatureSpec::numeric("x", SourceCategory::Academic, None),
            FeatureSpec {
                name: "gender".into(),
                category: SourceCategory::Demographic,
                kind: FeatureKind::Categorical {
                    levels: vec!["F".into(), "M".into(), "NA".into()],
                },
                declared_range: None,
            },
            FeatureSpec {
                name: "ed_field".into(),
                category: SourceCategory::Demographic,
                kind: FeatureKind::Categorical {
                    levels: vec!["stem".into(), "health".into(), "humanities".into(), "admin".into()],
                },
                declared_range: None,
            },
            FeatureSpec {
                name: "motivation".into(),
                category: SourceCategory::Personality,
                kind: FeatureKind::Ordinal {
                    levels: Some(vec!["little".into(), "moderate".into(), "very".into()]),
                },
                declared_range: None,
            },
        ];
        let rows = vec![
            vec![
                FeatureValue::Num(1.5),
                FeatureValue::Cat("F".into()),
                FeatureValue::Cat("stem".into()),
                FeatureValue::Cat("very".into()),
            ],
            vec![
                FeatureValue::Num(-2.0),
                FeatureValue::Cat("M".into()),
                FeatureValue::Cat("admin".into()),
                FeatureValue::Cat("little".into()),
            ],
        ];
        FeatureMatrix {
            specs,
            learner_ids: vec!["u".into(), "v".into()],
            rows,
            labels: Some(vec![Some(1), Some(0)]),
            quarantine: Vec::new(),
        }
    }

    #[test]
    fn one_hot_expands_to_k_columns_summing_to_one() {
        let encoded = encode(&small_matrix(), &EncodePolicy::default()).unwrap();
        let field_cols: Vec<usize> = encoded
            .columns
            .iter()
            .enumerate()
            .filter(|(_, c)| c.spec == "ed_field")
            .map(|(i, _)| i)
            .collect();
        assert_eq!(field_cols.len(), 4);
        for row in &encoded.rows {
            let total: f64 = field_cols.iter().map(|&i| row[i]).sum();
            assert_eq!(total, 1.0);
        }
    }

    #[test]
    fn gender_is_dropped_from_encoded_output() {
        let encoded = encode(&small_matrix(), &EncodePolicy::default()).unwrap();
        assert!(encoded.columns.iter().all(|c| !c.name.contains("gender")));
        assert!(encoded.manifest.entry("gender").is_none());
    }

    #[test]
    fn motivation_very_maps_to_two() {
        let encoded = encode(&small_matrix(), &EncodePolicy::default()).unwrap();
        let col = encoded.column_index("motivation").unwrap();
        assert_eq!(encoded.rows[0][col], 2.0);
        assert_eq!(encoded.rows[1][col], 0.0);
    }

    #[test]
    fn unseen_level_is_fatal_and_named() {
        let mut matrix = small_matrix();
        matrix.rows[0][3] = FeatureValue::Cat("desperate".into());
        let err = encode(&matrix, &EncodePolicy::default()).unwrap_err().to_string();
        assert!(err.contains("desperate"), "{err}");
    }

    #[test]
    fn category_selection_commutes_with_encoding() {
        let (bundle, _) = generate_bundle(&PlantSpec::new(30, 12)).unwrap();
        let matrix = build_minimal_features(&bundle).unwrap();
        let labels = derive_labels(&bundle, &Default::default()).unwrap();
        let (complete, _) = matrix.with_labels(&labels).filter_complete();
        let pick = [SourceCategory::Demographic, SourceCategory::Behavioral];

        let select_then_encode =
            encode(&complete.select_categories(&pick), &EncodePolicy::default()).unwrap();
        let encode_then_project =
            encode(&complete, &EncodePolicy::default()).unwrap().project_categories(&pick);
        assert_eq!(select_then_encode.columns, encode_then_project.columns);
        assert_eq!(select_then_encode.rows, encode_then_project.rows);
        assert_eq!(select_then_encode.labels, encode_then_project.labels);
    }

    fn plain_encoded(columns: Vec<(&str, Vec<f64>)>) -> EncodedMatrix {
        let n = columns.first().map(|(_, v)| v.len()).unwrap_or(0);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| columns.iter().map(|(_, v)| v[i]).collect())
            .collect();
        EncodedMatrix {
            columns: columns
                .iter()
                .map(|(name, _)| ColumnMeta {
                    name: name.to_string(),
                    spec: name.to_string(),
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

    #[test]
    fn zero_to_ten_column_standardizes_to_unit_values() {
        // population convention: {0, 10} has mean 5 and std 5
        let x = plain_encoded(vec![("v", vec![0.0, 10.0])]);
        let (scaled, stats) = standardize(&x, None).unwrap();
        assert_eq!(scaled.rows[0][0], -1.0);
        assert_eq!(scaled.rows[1][0], 1.0);
        assert!(!stats.columns[0].zero_variance);
        assert!(scaled.standardized);
    }

    #[test]
    fn constant_column_is_flagged_and_passed_through() {
        let x = plain_encoded(vec![("c", vec![4.0, 4.0, 4.0])]);
        let (scaled, stats) = standardize(&x, None).unwrap();
        assert!(stats.columns[0].zero_variance);
        assert_eq!(stats.zero_variance_columns(), vec!["c"]);
        assert_eq!(scaled.rows, x.rows);
    }

    #[test]
    fn standardizing_standardized_data_changes_nothing() {
        let x = plain_encoded(vec![("v", vec![1.0, 2.0, 3.0, 10.0])]);
        let (once, _) = standardize(&x, None).unwrap();
        let (twice, _) = standardize(&once, None).unwrap();
        for (a, b) in once.rows.iter().flatten().zip(twice.rows.iter().flatten()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn fitted_stats_apply_to_test_rows() {
        let train = plain_encoded(vec![("v", vec![0.0, 10.0])]);
        let (_, stats) = standardize(&train, None).unwrap();
        let test = plain_encoded(vec![("v", vec![5.0])]);
        let (scaled, _) = standardize(&test, Some(&stats)).unwrap();
        assert_eq!(scaled.rows[0][0], 0.0);
    }

    #[test]
    fn common_view_yields_three_zscored_columns_per_bundle() {
        let (b1, _) = generate_bundle(&PlantSpec::new(40, 1)).unwrap();
        let (b2, _) = generate_bundle(&PlantSpec::new(50, 2)).unwrap();
        let (b3, _) = generate_bundle(&PlantSpec::new(60, 3)).unwrap();
        let views = common_feature_view(&[&b1, &b2, &b3], &Default::default()).unwrap();
        assert_eq!(views.len(), 3);
        for view in &views {
            assert_eq!(
                view.column_names(),
                vec![names::AGE, names::ED_LEVEL, names::N_INTERACTIONS]
            );
            assert!(view.labels.is_some());
            let n = view.n_rows() as f64;
            for j in 0..3 {
                let values = view.column_values(j);
                let mean = values.iter().sum::<f64>() / n;
                let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                assert!(mean.abs() < 1e-9, "column {j} mean {mean}");
                assert!((var - 1.0).abs() < 1e-9, "column {j} var {var}");
            }
        }
    }

    #[test]
    fn common_view_requires_two_bundles() {
        let (b1, _) = generate_bundle(&PlantSpec::new(40, 1)).unwrap();
        assert!(common_feature_view(&[&b1], &Default::default()).is_err());
    }
}
