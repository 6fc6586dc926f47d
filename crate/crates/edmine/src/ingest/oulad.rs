//! Loader for the Open University learning-analytics tables.
//!
//! Consumes the published CSV layout: `studentInfo.csv`, `studentVle.csv`,
//! `studentAssessment.csv`, `assessments.csv` and `courses.csv`. One profile
//! is produced per distinct student id; students registered on several
//! module presentations keep the demographics and final result of their
//! chronologically last registration (presentation codes sort
//! chronologically). Clicks are summed over every VLE record, assessment
//! scores are averaged unweighted over non-exam assessments and rescaled to
//! 0-10.
//!
//! The exact cohort reduction used to produce published instance counts is
//! not part of the format; [`OuladFilter`] lets callers scope modules and
//! presentations before aggregation.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use crate::error::{EdmError, Result};

use super::{
    digest_file, field, open_csv, BandMaps, DatasetBundle, DatasetId, FinalOutcome, Gender,
    HeaderIndex, LearnerAggregate, LearnerProfile, LoadIssue,
};

const STUDENT_INFO: &str = "studentInfo.csv";
const STUDENT_VLE: &str = "studentVle.csv";
const STUDENT_ASSESSMENT: &str = "studentAssessment.csv";
const ASSESSMENTS: &str = "assessments.csv";
const COURSES: &str = "courses.csv";

/// Registration-level scoping applied before aggregation. Empty sets mean
/// "keep everything".
#[derive(Debug, Clone, Default)]
pub struct OuladFilter {
    pub modules: BTreeSet<String>,
    pub presentations: BTreeSet<String>,
}

impl OuladFilter {
    fn keeps(&self, module: &str, presentation: &str) -> bool {
        (self.modules.is_empty() || self.modules.contains(module))
            && (self.presentations.is_empty() || self.presentations.contains(presentation))
    }
}

struct Registration {
    presentation: String,
    gender: Option<Gender>,
    age: Option<f64>,
    ed_level: Option<f64>,
    final_result: String,
}

/// Load an OULAD directory into a D2 bundle.
pub fn load_oulad(directory: &Path, bands: &BandMaps, filter: &OuladFilter) -> Result<DatasetBundle> {
    let mut bundle = DatasetBundle::new(DatasetId::D2);

    for name in [
        STUDENT_INFO,
        STUDENT_VLE,
        STUDENT_ASSESSMENT,
        ASSESSMENTS,
        COURSES,
    ] {
        let path = directory.join(name);
        if !path.exists() {
            return Err(EdmError::MissingFile(path));
        }
        bundle.provenance.push(digest_file(&path)?);
    }

    // courses.csv is read for structural validation only: every registration
    // must reference a known module presentation.
    let mut known_presentations: BTreeSet<(String, String)> = BTreeSet::new();
    {
        let path = directory.join(COURSES);
        let mut reader = open_csv(&path)?;
        let headers = reader
            .headers()
            .map_err(|e| EdmError::Csv {
                file: COURSES.into(),
                source: e,
            })?
            .clone();
        let idx = HeaderIndex::new(COURSES, &headers);
        let (c_mod, c_pres) = (idx.require("code_module")?, idx.require("code_presentation")?);
        for record in reader.records() {
            let record = record.map_err(|e| EdmError::Csv {
                file: COURSES.into(),
                source: e,
            })?;
            known_presentations.insert((
                field(&record, c_mod).to_string(),
                field(&record, c_pres).to_string(),
            ));
        }
    }

    // assessments.csv: id → is this an exam.
    let mut assessment_is_exam: BTreeMap<String, bool> = BTreeMap::new();
    let mut assessment_scope: BTreeMap<String, (String, String)> = BTreeMap::new();
    {
        let path = directory.join(ASSESSMENTS);
        let mut reader = open_csv(&path)?;
        let headers = reader
            .headers()
            .map_err(|e| EdmError::Csv {
                file: ASSESSMENTS.into(),
                source: e,
            })?
            .clone();
        let idx = HeaderIndex::new(ASSESSMENTS, &headers);
        let (c_mod, c_pres, c_id, c_type) = (
            idx.require("code_module")?,
            idx.require("code_presentation")?,
            idx.require("id_assessment")?,
            idx.require("assessment_type")?,
        );
        for record in reader.records() {
            let record = record.map_err(|e| EdmError::Csv {
                file: ASSESSMENTS.into(),
                source: e,
            })?;
            let id = field(&record, c_id).to_string();
            assessment_is_exam.insert(id.clone(), field(&record, c_type) == "Exam");
            assessment_scope.insert(
                id,
                (
                    field(&record, c_mod).to_string(),
                    field(&record, c_pres).to_string(),
                ),
            );
        }
    }

    // studentInfo.csv: registrations, keeping the last presentation per
    // student after filtering.
    let mut registrations: BTreeMap<String, Registration> = BTreeMap::new();
    let mut kept_students: BTreeSet<String> = BTreeSet::new();
    {
        let path = directory.join(STUDENT_INFO);
        let mut reader = open_csv(&path)?;
        let headers = reader
            .headers()
            .map_err(|e| EdmError::Csv {
                file: STUDENT_INFO.into(),
                source: e,
            })?
            .clone();
        let idx = HeaderIndex::new(STUDENT_INFO, &headers);
        let (c_mod, c_pres, c_id, c_gender, c_edu, c_age, c_result) = (
            idx.require("code_module")?,
            idx.require("code_presentation")?,
            idx.require("id_student")?,
            idx.require("gender")?,
            idx.require("highest_education")?,
            idx.require("age_band")?,
            idx.require("final_result")?,
        );
        for (row, record) in reader.records().enumerate() {
            let record = record.map_err(|e| EdmError::Csv {
                file: STUDENT_INFO.into(),
                source: e,
            })?;
            let module = field(&record, c_mod).to_string();
            let presentation = field(&record, c_pres).to_string();
            if !known_presentations.contains(&(module.clone(), presentation.clone())) {
                return Err(EdmError::DanglingKey {
                    file: STUDENT_INFO.into(),
                    row,
                    key: "code_module/code_presentation".into(),
                    value: format!("{module}/{presentation}"),
                });
            }
            if !filter.keeps(&module, &presentation) {
                continue;
            }
            let student = field(&record, c_id).to_string();
            let gender = match field(&record, c_gender) {
                "F" => Some(Gender::F),
                "M" => Some(Gender::M),
                _ => None,
            };
            let age = bands.oulad.age(STUDENT_INFO, row, field(&record, c_age))?;
            let ed_level = bands
                .oulad
                .education(STUDENT_INFO, row, field(&record, c_edu))?;
            let reg = Registration {
                presentation: presentation.clone(),
                gender,
                age,
                ed_level,
                final_result: field(&record, c_result).to_string(),
            };
            kept_students.insert(student.clone());
            match registrations.get(&student) {
                Some(existing) if existing.presentation >= reg.presentation => {}
                _ => {
                    registrations.insert(student, reg);
                }
            }
        }
    }

    // studentVle.csv: total clicks per kept student.
    let mut clicks: BTreeMap<String, f64> = BTreeMap::new();
    {
        let path = directory.join(STUDENT_VLE);
        let mut reader = open_csv(&path)?;
        let headers = reader
            .headers()
            .map_err(|e| EdmError::Csv {
                file: STUDENT_VLE.into(),
                source: e,
            })?
            .clone();
        let idx = HeaderIndex::new(STUDENT_VLE, &headers);
        let (c_mod, c_pres, c_id, c_clicks) = (
            idx.require("code_module")?,
            idx.require("code_presentation")?,
            idx.require("id_student")?,
            idx.require("sum_click")?,
        );
        for (row, record) in reader.records().enumerate() {
            let record = record.map_err(|e| EdmError::Csv {
                file: STUDENT_VLE.into(),
                source: e,
            })?;
            if !filter.keeps(field(&record, c_mod), field(&record, c_pres)) {
                continue;
            }
            let student = field(&record, c_id).to_string();
            if !kept_students.contains(&student) {
                continue;
            }
            let raw = field(&record, c_clicks);
            match raw.parse::<f64>() {
                Ok(v) => *clicks.entry(student).or_insert(0.0) += v,
                Err(_) => bundle.load_issues.push(LoadIssue {
                    file: STUDENT_VLE.into(),
                    row,
                    message: format!("non-numeric sum_click `{raw}`"),
                }),
            }
        }
    }

    // studentAssessment.csv: unweighted mean non-exam score per student.
    let mut score_sum: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    {
        let path = directory.join(STUDENT_ASSESSMENT);
        let mut reader = open_csv(&path)?;
        let headers = reader
            .headers()
            .map_err(|e| EdmError::Csv {
                file: STUDENT_ASSESSMENT.into(),
                source: e,
            })?
            .clone();
        let idx = HeaderIndex::new(STUDENT_ASSESSMENT, &headers);
        let (c_assessment, c_id, c_score) = (
            idx.require("id_assessment")?,
            idx.require("id_student")?,
            idx.require("score")?,
        );
        for (row, record) in reader.records().enumerate() {
            let record = record.map_err(|e| EdmError::Csv {
                file: STUDENT_ASSESSMENT.into(),
                source: e,
            })?;
            let assessment = field(&record, c_assessment);
            let is_exam = match assessment_is_exam.get(assessment) {
                Some(v) => *v,
                None => {
                    return Err(EdmError::DanglingKey {
                        file: STUDENT_ASSESSMENT.into(),
                        row,
                        key: "id_assessment".into(),
                        value: assessment.to_string(),
                    })
                }
            };
            if is_exam {
                continue;
            }
            if let Some((module, presentation)) = assessment_scope.get(assessment) {
                if !filter.keeps(module, presentation) {
                    continue;
                }
            }
            let student = field(&record, c_id).to_string();
            if !kept_students.contains(&student) {
                continue;
            }
            let raw = field(&record, c_score);
            if raw.is_empty() || raw == "?" {
                bundle.load_issues.push(LoadIssue {
                    file: STUDENT_ASSESSMENT.into(),
                    row,
                    message: "missing score".into(),
                });
                continue;
            }
            match raw.parse::<f64>() {
                Ok(v) => {
                    let e = score_sum.entry(student).or_insert((0.0, 0));
                    e.0 += v;
                    e.1 += 1;
                }
                Err(_) => bundle.load_issues.push(LoadIssue {
                    file: STUDENT_ASSESSMENT.into(),
                    row,
                    message: format!("non-numeric score `{raw}`"),
                }),
            }
        }
    }

    for (student, reg) in registrations {
        let outcome = match reg.final_result.as_str() {
            "Pass" | "Distinction" => Some(FinalOutcome::PassFail(true)),
            "Fail" | "Withdrawn" => Some(FinalOutcome::PassFail(false)),
            "" => None,
            other => {
                return Err(EdmError::UnknownLabel {
                    file: STUDENT_INFO.into(),
                    row: 0,
                    what: "final_result".into(),
                    label: other.to_string(),
                })
            }
        };
        // OULAD scores are 0-100; the academic feature lives on 0-10.
        let avrg_grade = score_sum
            .get(&student)
            .map(|(sum, n)| sum / *n as f64 / 10.0);
        let n_interactions = Some(clicks.get(&student).copied().unwrap_or(0.0));
        bundle.profiles.push(LearnerProfile {
            learner_id: student.clone(),
            age: reg.age,
            gender: reg.gender,
            ed_level: reg.ed_level,
            ed_field: None,
            native_lang: None,
            motivation: None,
            descr_pos: String::new(),
            descr_neg: String::new(),
        });
        bundle.aggregates.push(LearnerAggregate {
            learner_id: student,
            n_interactions,
            avrg_grade,
            outcome,
        });
    }

    bundle.sort_canonical();
    Ok(bundle)
}
