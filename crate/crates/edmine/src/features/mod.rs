//! Feature matrices: building, labeling, encoding, alignment.
//!
//! A [`FeatureMatrix`] holds named, source-category-tagged columns of raw
//! feature values keyed by learner. Rows that cannot be fully computed are
//! never imputed; they are flagged for quarantine and dropped by
//! [`filter_complete`]. [`encode`](encode::encode) turns a complete matrix
//! into a dense numeric [`EncodedMatrix`](encode::EncodedMatrix) ready for
//! the classifiers.

mod build;
mod encode;

pub use build::{
    build_additional_features, build_common_features, build_minimal_features, derive_labels,
    CanvasLabelRule, LabelPolicy, LabelSet,
};
pub use encode::{
    common_feature_view, encode, standardize, ColumnMeta, ColumnStats, EncodePolicy,
    EncodedMatrix, EncodingManifest, ManifestEntry, RowTag, StandardizeStats,
};

use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{EdmError, Result};

/// Canonical feature column names.
pub mod names {
    pub const AGE: &str = "age";
    pub const GENDER: &str = "gender";
    pub const ED_LEVEL: &str = "ed_level";
    pub const ED_FIELD: &str = "ed_field";
    pub const AVRG_GRADE: &str = "avrg_grade";
    pub const COMPLETION: &str = "%_completion";
    pub const NB_ACTION: &str = "nb_action";
    pub const TIME: &str = "time";
    pub const MOTIVATION: &str = "motivation";
    pub const VISUAL: &str = "visual";
    pub const VERBAL: &str = "verbal";
    pub const FACTUAL: &str = "factual";
    pub const PRACTICAL: &str = "practical";
    pub const MEMORY: &str = "memory";
    pub const DEDUCTION: &str = "deduction";
    /// Cross-dataset interaction count used by the common feature view.
    pub const N_INTERACTIONS: &str = "n_interactions";
}

/// The five data-source categories features are grouped into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SourceCategory {
    Demographic,
    Academic,
    Behavioral,
    Personality,
    LearningPrefs,
}

impl SourceCategory {
    pub const ALL: [SourceCategory; 5] = [
        SourceCategory::Demographic,
        SourceCategory::Academic,
        SourceCategory::Behavioral,
        SourceCategory::Personality,
        SourceCategory::LearningPrefs,
    ];

    pub fn code(&self) -> char {
        match self {
            SourceCategory::Demographic => 'D',
            SourceCategory::Academic => 'A',
            SourceCategory::Behavioral => 'B',
            SourceCategory::Personality => 'P',
            SourceCategory::LearningPrefs => 'L',
        }
    }

    pub fn parse(c: char) -> Option<Self> {
        match c {
            'D' => Some(SourceCategory::Demographic),
            'A' => Some(SourceCategory::Academic),
            'B' => Some(SourceCategory::Behavioral),
            'P' => Some(SourceCategory::Personality),
            'L' => Some(SourceCategory::LearningPrefs),
            _ => None,
        }
    }
}

impl fmt::Display for SourceCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FeatureKind {
    Numeric,
    /// Ordered levels; named levels encode to their position.
    Ordinal { levels: Option<Vec<String>> },
    /// Unordered levels; one-hot encoded. The level list is part of the
    /// spec, not derived from data, so the encoded width is stable.
    Categorical { levels: Vec<String> },
}

impl FeatureKind {
    fn describe(&self) -> String {
        match self {
            FeatureKind::Numeric => "numeric".into(),
            FeatureKind::Ordinal { levels: None } => "ordinal".into(),
            FeatureKind::Ordinal {
                levels: Some(levels),
            } => format!("ordinal:{}", levels.join("|")),
            FeatureKind::Categorical { levels } => format!("categorical:{}", levels.join("|")),
        }
    }

    fn parse(s: &str) -> Option<Self> {
        if s == "numeric" {
            return Some(FeatureKind::Numeric);
        }
        if s == "ordinal" {
            return Some(FeatureKind::Ordinal { levels: None });
        }
        if let Some(rest) = s.strip_prefix("ordinal:") {
            return Some(FeatureKind::Ordinal {
                levels: Some(rest.split('|').map(str::to_string).collect()),
            });
        }
        if let Some(rest) = s.strip_prefix("categorical:") {
            return Some(FeatureKind::Categorical {
                levels: rest.split('|').map(str::to_string).collect(),
            });
        }
        None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub category: SourceCategory,
    pub kind: FeatureKind,
    pub declared_range: Option<(f64, f64)>,
}

impl FeatureSpec {
    pub fn numeric(
        name: &str,
        category: SourceCategory,
        declared_range: Option<(f64, f64)>,
    ) -> Self {
        FeatureSpec {
            name: name.into(),
            category,
            kind: FeatureKind::Numeric,
            declared_range,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FeatureValue {
    Num(f64),
    Cat(String),
    Missing,
}

impl FeatureValue {
    pub fn as_num(&self) -> Option<f64> {
        match self {
            FeatureValue::Num(v) => Some(*v),
            _ => None,
        }
    }

    pub fn is_missing(&self) -> bool {
        matches!(self, FeatureValue::Missing)
    }
}

/// A row flagged for removal and why.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quarantine {
    pub learner_id: String,
    pub reason: String,
}

/// Named feature columns × learner rows, plus optional binary labels
/// (1 = pass, 0 = fail).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub specs: Vec<FeatureSpec>,
    pub learner_ids: Vec<String>,
    /// Row-major values; one entry per spec per row.
    pub rows: Vec<Vec<FeatureValue>>,
    /// Per-row labels; `None` entries mark learners without an outcome.
    pub labels: Option<Vec<Option<u8>>>,
    pub quarantine: Vec<Quarantine>,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn spec_index(&self, name: &str) -> Option<usize> {
        self.specs.iter().position(|s| s.name == name)
    }

    pub fn quarantined_ids(&self) -> BTreeSet<&str> {
        self.quarantine
            .iter()
            .map(|q| q.learner_id.as_str())
            .collect()
    }

    /// Column-wise concatenation. Both matrices must describe the same
    /// learners in the same order; quarantine flags are merged.
    pub fn join(&self, other: &FeatureMatrix) -> Result<FeatureMatrix> {
        if self.learner_ids != other.learner_ids {
            return Err(EdmError::Feature(
                "cannot join feature matrices over different learner sets".into(),
            ));
        }
        let mut names = BTreeSet::new();
        for s in self.specs.iter().chain(other.specs.iter()) {
            if !names.insert(s.name.as_str()) {
                return Err(EdmError::Feature(format!(
                    "duplicate feature name `{}` in join",
                    s.name
                )));
            }
        }
        let labels = match (&self.labels, &other.labels) {
            (Some(_), Some(_)) => {
                return Err(EdmError::Feature(
                    "both join sides carry labels".into(),
                ))
            }
            (Some(l), None) | (None, Some(l)) => Some(l.clone()),
            (None, None) => None,
        };
        let mut specs = self.specs.clone();
        specs.extend(other.specs.iter().cloned());
        let rows = self
            .rows
            .iter()
            .zip(other.rows.iter())
            .map(|(a, b)| {
                let mut row = a.clone();
                row.extend(b.iter().cloned());
                row
            })
            .collect();
        let mut quarantine = self.quarantine.clone();
        quarantine.extend(other.quarantine.iter().cloned());
        Ok(FeatureMatrix {
            specs,
            learner_ids: self.learner_ids.clone(),
            rows,
            labels,
            quarantine,
        })
    }

    /// Attach labels; learners without one are flagged.
    pub fn with_labels(&self, labels: &LabelSet) -> FeatureMatrix {
        let mut out = self.clone();
        let mut quarantine = out.quarantine;
        let attached = out
            .learner_ids
            .iter()
            .map(|id| {
                let v = labels.labels.get(id).copied();
                if v.is_none() {
                    quarantine.push(Quarantine {
                        learner_id: id.clone(),
                        reason: "no final outcome".into(),
                    });
                }
                v
            })
            .collect();
        out.labels = Some(attached);
        out.quarantine = quarantine;
        // Flags recorded when the labels were derived also apply here.
        for q in &labels.quarantined {
            if out.learner_ids.contains(&q.learner_id)
                && !out.quarantine.iter().any(|e| e == q)
            {
                out.quarantine.push(q.clone());
            }
        }
        out
    }

    /// Keep only the specs in the given categories (order preserved).
    pub fn select_categories(&self, categories: &[SourceCategory]) -> FeatureMatrix {
        let keep: Vec<usize> = self
            .specs
            .iter()
            .enumerate()
            .filter(|(_, s)| categories.contains(&s.category))
            .map(|(i, _)| i)
            .collect();
        self.select_spec_indices(&keep)
    }

    fn select_spec_indices(&self, keep: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            specs: keep.iter().map(|&i| self.specs[i].clone()).collect(),
            learner_ids: self.learner_ids.clone(),
            rows: self
                .rows
                .iter()
                .map(|r| keep.iter().map(|&i| r[i].clone()).collect())
                .collect(),
            labels: self.labels.clone(),
            quarantine: self.quarantine.clone(),
        }
    }

    /// Drop every flagged row (quarantine entry, missing value, or missing
    /// label) and report what was removed.
    pub fn filter_complete(&self) -> (FeatureMatrix, Vec<Quarantine>) {
        let flagged = self.quarantined_ids();
        let mut removed = Vec::new();
        let mut keep = Vec::new();
        for (i, id) in self.learner_ids.iter().enumerate() {
            let mut reasons: Vec<String> = self
                .quarantine
                .iter()
                .filter(|q| q.learner_id == *id)
                .map(|q| q.reason.clone())
                .collect();
            if !flagged.contains(id.as_str()) {
                for (j, v) in self.rows[i].iter().enumerate() {
                    if v.is_missing() {
                        reasons.push(format!("missing {}", self.specs[j].name));
                    }
                }
                if let Some(labels) = &self.labels {
                    if labels[i].is_none() && reasons.is_empty() {
                        reasons.push("no final outcome".into());
                    }
                }
            }
            if reasons.is_empty()
                && !self.rows[i].iter().any(|v| v.is_missing())
                && self
                    .labels
                    .as_ref()
                    .map(|l| l[i].is_some())
                    .unwrap_or(true)
            {
                keep.push(i);
            } else {
                removed.push(Quarantine {
                    learner_id: id.clone(),
                    reason: if reasons.is_empty() {
                        "flagged".into()
                    } else {
                        reasons.join("; ")
                    },
                });
            }
        }
        let out = FeatureMatrix {
            specs: self.specs.clone(),
            learner_ids: keep.iter().map(|&i| self.learner_ids[i].clone()).collect(),
            rows: keep.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: self
                .labels
                .as_ref()
                .map(|l| keep.iter().map(|&i| l[i]).collect()),
            quarantine: Vec::new(),
        };
        (out, removed)
    }

    /// Serialize to a single CSV with a `#`-prefixed metadata header block.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        writeln!(buf, "# edmine-feature-matrix v1").map_err(|e| EdmError::io(path, e))?;
        for s in &self.specs {
            let range = s
                .declared_range
                .map(|(lo, hi)| format!(" range={lo},{hi}"))
                .unwrap_or_default();
            writeln!(
                buf,
                "# column {} category={} kind={}{}",
                s.name,
                s.category.code(),
                s.kind.describe(),
                range
            )
            .map_err(|e| EdmError::io(path, e))?;
        }
        for q in &self.quarantine {
            writeln!(buf, "# quarantine {}\t{}", q.learner_id, q.reason)
                .map_err(|e| EdmError::io(path, e))?;
        }
        let mut w = csv::Writer::from_writer(buf);
        let mut header = vec!["learner_id".to_string()];
        header.extend(self.specs.iter().map(|s| s.name.clone()));
        if self.labels.is_some() {
            header.push("label".into());
        }
        w.write_record(&header).map_err(|e| EdmError::Csv {
            file: path.display().to_string(),
            source: e,
        })?;
        for (i, id) in self.learner_ids.iter().enumerate() {
            let mut record = vec![id.clone()];
            for v in &self.rows[i] {
                record.push(match v {
                    FeatureValue::Num(x) => format!("{x}"),
                    FeatureValue::Cat(s) => s.clone(),
                    FeatureValue::Missing => String::new(),
                });
            }
            if let Some(labels) = &self.labels {
                record.push(labels[i].map(|l| l.to_string()).unwrap_or_default());
            }
            w.write_record(&record).map_err(|e| EdmError::Csv {
                file: path.display().to_string(),
                source: e,
            })?;
        }
        let body = w.into_inner().expect("vec writer");
        std::fs::write(path, body).map_err(|e| EdmError::io(path, e))
    }

    /// Inverse of [`write_csv`](Self::write_csv).
    pub fn read_csv(path: &Path) -> Result<FeatureMatrix> {
        let text = std::fs::read_to_string(path).map_err(|e| EdmError::io(path, e))?;
        let file = path.display().to_string();
        let mut specs: Vec<FeatureSpec> = Vec::new();
        let mut quarantine = Vec::new();
        let mut body = String::new();
        for line in text.lines() {
            if let Some(meta) = line.strip_prefix("# ") {
                if let Some(rest) = meta.strip_prefix("column ") {
                    let mut parts = rest.split_whitespace();
                    let name = parts
                        .next()
                        .ok_or_else(|| EdmError::Feature(format!("{file}: bad column line")))?
                        .to_string();
                    let mut category = None;
                    let mut kind = None;
                    let mut range = None;
                    for p in parts {
                        if let Some(c) = p.strip_prefix("category=") {
                            category = c.chars().next().and_then(SourceCategory::parse);
                        } else if let Some(k) = p.strip_prefix("kind=") {
                            kind = FeatureKind::parse(k);
                        } else if let Some(r) = p.strip_prefix("range=") {
                            let mut it = r.split(',');
                            let lo = it.next().and_then(|v| v.parse().ok());
                            let hi = it.next().and_then(|v| v.parse().ok());
                            if let (Some(lo), Some(hi)) = (lo, hi) {
                                range = Some((lo, hi));
                            }
                        }
                    }
                    specs.push(FeatureSpec {
                        name,
                        category: category.ok_or_else(|| {
                            EdmError::Feature(format!("{file}: column without category"))
                        })?,
                        kind: kind.ok_or_else(|| {
                            EdmError::Feature(format!("{file}: column without kind"))
                        })?,
                        declared_range: range,
                    });
                } else if let Some(rest) = meta.strip_prefix("quarantine ") {
                    let (id, reason) = rest.split_once('\t').unwrap_or((rest, ""));
                    quarantine.push(Quarantine {
                        learner_id: id.to_string(),
                        reason: reason.to_string(),
                    });
                }
            } else if !line.starts_with('#') {
                body.push_str(line);
                body.push('\n');
            }
        }
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(body.as_bytes());
        let headers = reader
            .headers()
            .map_err(|e| EdmError::Csv {
                file: file.clone(),
                source: e,
            })?
            .clone();
        let has_label = headers.iter().last() == Some("label");
        let mut learner_ids = Vec::new();
        let mut rows = Vec::new();
        let mut labels: Vec<Option<u8>> = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| EdmError::Csv {
                file: file.clone(),
                source: e,
            })?;
            learner_ids.push(record.get(0).unwrap_or("").to_string());
            let mut row = Vec::with_capacity(specs.len());
            for (j, spec) in specs.iter().enumerate() {
                let raw = record.get(j + 1).unwrap_or("");
                if raw.is_empty() {
                    row.push(FeatureValue::Missing);
                } else {
                    match spec.kind {
                        FeatureKind::Numeric | FeatureKind::Ordinal { levels: None } => {
                            let v = raw.parse::<f64>().map_err(|_| {
                                EdmError::Feature(format!(
                                    "{file}: non-numeric value `{raw}` for {}",
                                    spec.name
                                ))
                            })?;
                            row.push(FeatureValue::Num(v));
                        }
                        _ => row.push(FeatureValue::Cat(raw.to_string())),
                    }
                }
            }
            if has_label {
                let raw = record.get(specs.len() + 1).unwrap_or("");
                labels.push(if raw.is_empty() {
                    None
                } else {
                    Some(raw.parse::<u8>().map_err(|_| {
                        EdmError::Feature(format!("{file}: non-binary label `{raw}`"))
                    })?)
                });
            }
            rows.push(row);
        }
        Ok(FeatureMatrix {
            specs,
            learner_ids,
            rows,
            labels: if has_label { Some(labels) } else { None },
            quarantine,
        })
    }
}
