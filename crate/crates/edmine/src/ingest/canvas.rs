//! Loader for a de-identified person-course CSV (D3).
//!
//! Only the columns needed downstream are consumed: learner id, age band,
//! education band, event count and the completion/grade outcome columns.
//! Column names follow the published layout and can be remapped through
//! [`CanvasColumns`] when a download uses variants. A learner id appearing
//! on several course rows is disambiguated with an occurrence suffix, so
//! every person-course row becomes one learner row.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{EdmError, Result};

use super::{
    digest_file, field, open_csv, BandMaps, DatasetBundle, DatasetId, FinalOutcome, HeaderIndex,
    LearnerAggregate, LearnerProfile, LoadIssue,
};

/// Column-name mapping for the person-course file.
#[derive(Debug, Clone)]
pub struct CanvasColumns {
    pub learner_id: String,
    pub age_band: String,
    pub education_band: String,
    pub event_count: String,
    pub completed: String,
    /// Optional numeric grade column; consulted when present.
    pub grade: String,
}

impl Default for CanvasColumns {
    fn default() -> Self {
        CanvasColumns {
            learner_id: "userid_DI".into(),
            age_band: "age_DI".into(),
            education_band: "LoE_DI".into(),
            event_count: "nevents".into(),
            completed: "completed".into(),
            grade: "grade".into(),
        }
    }
}

/// Load a person-course CSV into a D3 bundle.
///
/// Required columns missing from the header are fatal (the error lists the
/// available columns). Unparseable values inside a row skip that row and are
/// counted in the bundle's load issues, echoed by `validate_bundle`.
pub fn load_canvas(file: &Path, bands: &BandMaps, columns: &CanvasColumns) -> Result<DatasetBundle> {
    let mut bundle = DatasetBundle::new(DatasetId::D3);
    if !file.exists() {
        return Err(EdmError::MissingFile(file.to_path_buf()));
    }
    bundle.provenance.push(digest_file(file)?);
    let file_name = bundle.provenance[0].file.clone();

    let mut reader = open_csv(file)?;
    let headers = reader
        .headers()
        .map_err(|e| EdmError::Csv {
            file: file_name.clone(),
            source: e,
        })?
        .clone();
    let idx = HeaderIndex::new(&file_name, &headers);
    let c_id = idx.require(&columns.learner_id)?;
    let c_age = idx.require(&columns.age_band)?;
    let c_edu = idx.require(&columns.education_band)?;
    let c_events = idx.require(&columns.event_count)?;
    let c_completed = idx.require(&columns.completed)?;
    let c_grade = idx.names().iter().position(|n| *n == columns.grade);

    let mut seen: BTreeMap<String, usize> = BTreeMap::new();

    'rows: for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| EdmError::Csv {
            file: file_name.clone(),
            source: e,
        })?;
        let raw_id = field(&record, c_id).to_string();
        if raw_id.is_empty() {
            bundle.load_issues.push(LoadIssue {
                file: file_name.clone(),
                row,
                message: "empty learner id".into(),
            });
            continue;
        }
        let occurrence = seen.entry(raw_id.clone()).or_insert(0);
        let learner_id = if *occurrence == 0 {
            raw_id.clone()
        } else {
            format!("{raw_id}#{occurrence}")
        };
        *occurrence += 1;

        let age = bands.canvas.age(&file_name, row, field(&record, c_age))?;
        let ed_level = bands
            .canvas
            .education(&file_name, row, field(&record, c_edu))?;

        let events_raw = field(&record, c_events);
        let n_interactions = if events_raw.is_empty() {
            None
        } else {
            match events_raw.parse::<f64>() {
                Ok(v) => Some(v),
                Err(_) => {
                    bundle.load_issues.push(LoadIssue {
                        file: file_name.clone(),
                        row,
                        message: format!("non-numeric event count `{events_raw}`"),
                    });
                    continue 'rows;
                }
            }
        };

        let completed_raw = field(&record, c_completed);
        let completed = match completed_raw {
            "" => None,
            "1" | "true" | "TRUE" | "yes" => Some(true),
            "0" | "false" | "FALSE" | "no" => Some(false),
            other => {
                bundle.load_issues.push(LoadIssue {
                    file: file_name.clone(),
                    row,
                    message: format!("non-boolean completed `{other}`"),
                });
                continue 'rows;
            }
        };
        let grade = match c_grade {
            Some(c) => {
                let raw = field(&record, c);
                if raw.is_empty() {
                    None
                } else {
                    match raw.parse::<f64>() {
                        Ok(v) => Some(v),
                        Err(_) => {
                            bundle.load_issues.push(LoadIssue {
                                file: file_name.clone(),
                                row,
                                message: format!("non-numeric grade `{raw}`"),
                            });
                            continue 'rows;
                        }
                    }
                }
            }
            None => None,
        };
        let outcome = completed.map(|completed| FinalOutcome::Completion { completed, grade });

        let mut profile = LearnerProfile::empty(learner_id.clone());
        profile.age = age;
        profile.ed_level = ed_level;
        bundle.profiles.push(profile);
        bundle.aggregates.push(LearnerAggregate {
            learner_id,
            n_interactions,
            avrg_grade: None,
            outcome,
        });
    }

    bundle.sort_canonical();
    Ok(bundle)
}
