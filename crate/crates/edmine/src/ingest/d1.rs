//! Loader and writer for the collected-course canonical CSV set.
//!
//! A D1 directory holds five files:
//!
//! * `learners.csv` — learner_id,age,gender,ed_level,ed_field,native_lang,motivation,descr_pos,descr_neg
//! * `events.csv` — learner_id,item_id,item_kind,action,timestamp
//! * `quiz_attempts.csv` — learner_id,quiz_id,grade,max_grade,time_started,time_finished
//! * `quiz_items.csv` — quiz_id,format_tag,content_tag,is_final
//! * `question_results.csv` — learner_id,quiz_id,question_id,skill_tag,correct
//!
//! Empty fields mean "not answered". Booleans are serialized as `1`/`0`
//! (read side also accepts `true`/`false`/`yes`/`no`). Free-text answers are
//! kept verbatim.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

use crate::error::{EdmError, Result};

use super::{
    digest_file, field, open_csv, ActionKind, ContentTag, DatasetBundle, DatasetId, EdField,
    FormatTag, Gender, HeaderIndex, InteractionEvent, ItemKind, LearnerProfile, Motivation,
    QuestionResult, QuizAttempt, QuizItemMeta, SkillTag,
};

pub const LEARNERS_CSV: &str = "learners.csv";
pub const EVENTS_CSV: &str = "events.csv";
pub const QUIZ_ATTEMPTS_CSV: &str = "quiz_attempts.csv";
pub const QUIZ_ITEMS_CSV: &str = "quiz_items.csv";
pub const QUESTION_RESULTS_CSV: &str = "question_results.csv";

const FILES: [&str; 5] = [
    LEARNERS_CSV,
    EVENTS_CSV,
    QUIZ_ATTEMPTS_CSV,
    QUIZ_ITEMS_CSV,
    QUESTION_RESULTS_CSV,
];

fn bad_row(file: &str, row: usize, message: impl Into<String>) -> EdmError {
    EdmError::BadRow {
        file: file.to_string(),
        row,
        message: message.into(),
    }
}

fn parse_opt_f64(file: &str, row: usize, name: &str, s: &str) -> Result<Option<f64>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse::<f64>()
        .map(Some)
        .map_err(|_| bad_row(file, row, format!("non-numeric {name} `{s}`")))
}

fn parse_f64(file: &str, row: usize, name: &str, s: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| bad_row(file, row, format!("non-numeric {name} `{s}`")))
}

fn parse_i64(file: &str, row: usize, name: &str, s: &str) -> Result<i64> {
    s.parse::<i64>()
        .map_err(|_| bad_row(file, row, format!("non-numeric {name} `{s}`")))
}

pub(crate) fn parse_bool(file: &str, row: usize, name: &str, s: &str) -> Result<bool> {
    match s {
        "1" | "true" | "yes" => Ok(true),
        "0" | "false" | "no" => Ok(false),
        _ => Err(bad_row(file, row, format!("non-boolean {name} `{s}`"))),
    }
}

fn bool_field(v: bool) -> &'static str {
    if v {
        "1"
    } else {
        "0"
    }
}

/// Load a D1 directory into a bundle. Missing files and dangling foreign
/// keys are fatal; the error names the file and row.
pub fn load_d1(directory: &Path) -> Result<DatasetBundle> {
    let mut bundle = DatasetBundle::new(DatasetId::D1);

    for name in FILES {
        let path = directory.join(name);
        if !path.exists() {
            return Err(EdmError::MissingFile(path));
        }
        bundle.provenance.push(digest_file(&path)?);
    }

    // learners.csv
    {
        let path = directory.join(LEARNERS_CSV);
        let mut reader = open_csv(&path)?;
        let headers = reader
            .headers()
            .map_err(|e| EdmError::Csv {
                file: LEARNERS_CSV.into(),
                source: e,
            })?
            .clone();
        let idx = HeaderIndex::new(LEARNERS_CSV, &headers);
        let (c_id, c_age, c_gender, c_level, c_field, c_lang, c_motiv, c_pos, c_neg) = (
            idx.require("learner_id")?,
            idx.require("age")?,
            idx.require("gender")?,
            idx.require("ed_level")?,
            idx.require("ed_field")?,
            idx.require("native_lang")?,
            idx.require("motivation")?,
            idx.require("descr_pos")?,
            idx.require("descr_neg")?,
        );
        for (row, record) in reader.records().enumerate() {
            let record = record.map_err(|e| EdmError::Csv {
                file: LEARNERS_CSV.into(),
                source: e,
            })?;
            let learner_id = field(&record, c_id).to_string();
            if learner_id.is_empty() {
                return Err(bad_row(LEARNERS_CSV, row, "empty learner_id"));
            }
            let gender_raw = field(&record, c_gender);
            let gender = if gender_raw.is_empty() {
                None
            } else {
                Some(Gender::parse(gender_raw).ok_or_else(|| EdmError::UnknownLabel {
                    file: LEARNERS_CSV.into(),
                    row,
                    what: "gender".into(),
                    label: gender_raw.into(),
                })?)
            };
            let field_raw = field(&record, c_field);
            let ed_field = if field_raw.is_empty() {
                None
            } else {
                Some(EdField::parse(field_raw).ok_or_else(|| EdmError::UnknownLabel {
                    file: LEARNERS_CSV.into(),
                    row,
                    what: "ed_field".into(),
                    label: field_raw.into(),
                })?)
            };
            let motiv_raw = field(&record, c_motiv);
            let motivation = if motiv_raw.is_empty() {
                None
            } else {
                Some(Motivation::parse(motiv_raw).ok_or_else(|| EdmError::UnknownLabel {
                    file: LEARNERS_CSV.into(),
                    row,
                    what: "motivation".into(),
                    label: motiv_raw.into(),
                })?)
            };
            let lang_raw = field(&record, c_lang);
            let native_lang = if lang_raw.is_empty() || lang_raw == "NA" {
                None
            } else {
                Some(parse_bool(LEARNERS_CSV, row, "native_lang", lang_raw)?)
            };
            bundle.profiles.push(LearnerProfile {
                learner_id,
                age: parse_opt_f64(LEARNERS_CSV, row, "age", field(&record, c_age))?,
                gender,
                ed_level: parse_opt_f64(LEARNERS_CSV, row, "ed_level", field(&record, c_level))?,
                ed_field,
                native_lang,
                motivation,
                descr_pos: record.get(c_pos).unwrap_or("").to_string(),
                descr_neg: record.get(c_neg).unwrap_or("").to_string(),
            });
        }
    }

    let known_learners: BTreeSet<&str> = bundle
        .profiles
        .iter()
        .map(|p| p.learner_id.as_str())
        .collect();
    let require_learner = |file: &str, row: usize, id: &str| -> Result<()> {
        if known_learners.contains(id) {
            Ok(())
        } else {
            Err(EdmError::DanglingKey {
                file: file.to_string(),
                row,
                key: "learner_id".into(),
                value: id.to_string(),
            })
        }
    };

    // quiz_items.csv first: attempts and question results resolve against it.
    {
        let path = directory.join(QUIZ_ITEMS_CSV);
        let mut reader = open_csv(&path)?;
        let headers = reader
            .headers()
            .map_err(|e| EdmError::Csv {
                file: QUIZ_ITEMS_CSV.into(),
                source: e,
            })?
            .clone();
        let idx = HeaderIndex::new(QUIZ_ITEMS_CSV, &headers);
        let (c_quiz, c_format, c_content, c_final) = (
            idx.require("quiz_id")?,
            idx.require("format_tag")?,
            idx.require("content_tag")?,
            idx.require("is_final")?,
        );
        for (row, record) in reader.records().enumerate() {
            let record = record.map_err(|e| EdmError::Csv {
                file: QUIZ_ITEMS_CSV.into(),
                source: e,
            })?;
            let format_raw = field(&record, c_format);
            let content_raw = field(&record, c_content);
            bundle.quiz_items.push(QuizItemMeta {
                quiz_id: field(&record, c_quiz).to_string(),
                format_tag: FormatTag::parse(format_raw).ok_or_else(|| EdmError::UnknownLabel {
                    file: QUIZ_ITEMS_CSV.into(),
                    row,
                    what: "format_tag".into(),
                    label: format_raw.into(),
                })?,
                content_tag: ContentTag::parse(content_raw).ok_or_else(|| {
                    EdmError::UnknownLabel {
                        file: QUIZ_ITEMS_CSV.into(),
                        row,
                        what: "content_tag".into(),
                        label: content_raw.into(),
                    }
                })?,
                is_final: parse_bool(QUIZ_ITEMS_CSV, row, "is_final", field(&record, c_final))?,
            });
        }
    }

    let quiz_final: BTreeMap<&str, bool> = bundle
        .quiz_items
        .iter()
        .map(|q| (q.quiz_id.as_str(), q.is_final))
        .collect();

    // events.csv
    {
        let path = directory.join(EVENTS_CSV);
        let mut reader = open_csv(&path)?;
        let headers = reader
            .headers()
            .map_err(|e| EdmError::Csv {
                file: EVENTS_CSV.into(),
                source: e,
            })?
            .clone();
        let idx = HeaderIndex::new(EVENTS_CSV, &headers);
        let (c_id, c_item, c_kind, c_action, c_ts) = (
            idx.require("learner_id")?,
            idx.require("item_id")?,
            idx.require("item_kind")?,
            idx.require("action")?,
            idx.require("timestamp")?,
        );
        for (row, record) in reader.records().enumerate() {
            let record = record.map_err(|e| EdmError::Csv {
                file: EVENTS_CSV.into(),
                source: e,
            })?;
            let learner_id = field(&record, c_id).to_string();
            require_learner(EVENTS_CSV, row, &learner_id)?;
            let kind_raw = field(&record, c_kind);
            let action_raw = field(&record, c_action);
            bundle.events.push(InteractionEvent {
                learner_id,
                item_id: field(&record, c_item).to_string(),
                item_kind: ItemKind::parse(kind_raw).ok_or_else(|| EdmError::UnknownLabel {
                    file: EVENTS_CSV.into(),
                    row,
                    what: "item_kind".into(),
                    label: kind_raw.into(),
                })?,
                action: ActionKind::parse(action_raw).ok_or_else(|| EdmError::UnknownLabel {
                    file: EVENTS_CSV.into(),
                    row,
                    what: "action".into(),
                    label: action_raw.into(),
                })?,
                timestamp: parse_i64(EVENTS_CSV, row, "timestamp", field(&record, c_ts))?,
            });
        }
    }

    // quiz_attempts.csv
    {
        let path = directory.join(QUIZ_ATTEMPTS_CSV);
        let mut reader = open_csv(&path)?;
        let headers = reader
            .headers()
            .map_err(|e| EdmError::Csv {
                file: QUIZ_ATTEMPTS_CSV.into(),
                source: e,
            })?
            .clone();
        let idx = HeaderIndex::new(QUIZ_ATTEMPTS_CSV, &headers);
        let (c_id, c_quiz, c_grade, c_max, c_start, c_finish) = (
            idx.require("learner_id")?,
            idx.require("quiz_id")?,
            idx.require("grade")?,
            idx.require("max_grade")?,
            idx.require("time_started")?,
            idx.require("time_finished")?,
        );
        for (row, record) in reader.records().enumerate() {
            let record = record.map_err(|e| EdmError::Csv {
                file: QUIZ_ATTEMPTS_CSV.into(),
                source: e,
            })?;
            let learner_id = field(&record, c_id).to_string();
            require_learner(QUIZ_ATTEMPTS_CSV, row, &learner_id)?;
            let quiz_id = field(&record, c_quiz).to_string();
            let is_final =
                *quiz_final
                    .get(quiz_id.as_str())
                    .ok_or_else(|| EdmError::DanglingKey {
                        file: QUIZ_ATTEMPTS_CSV.into(),
                        row,
                        key: "quiz_id".into(),
                        value: quiz_id.clone(),
                    })?;
            bundle.quiz_attempts.push(QuizAttempt {
                learner_id,
                quiz_id,
                grade: parse_f64(QUIZ_ATTEMPTS_CSV, row, "grade", field(&record, c_grade))?,
                max_grade: parse_f64(QUIZ_ATTEMPTS_CSV, row, "max_grade", field(&record, c_max))?,
                time_started: parse_i64(
                    QUIZ_ATTEMPTS_CSV,
                    row,
                    "time_started",
                    field(&record, c_start),
                )?,
                time_finished: parse_i64(
                    QUIZ_ATTEMPTS_CSV,
                    row,
                    "time_finished",
                    field(&record, c_finish),
                )?,
                is_final,
            });
        }
    }

    // question_results.csv
    {
        let path = directory.join(QUESTION_RESULTS_CSV);
        let mut reader = open_csv(&path)?;
        let headers = reader
            .headers()
            .map_err(|e| EdmError::Csv {
                file: QUESTION_RESULTS_CSV.into(),
                source: e,
            })?
            .clone();
        let idx = HeaderIndex::new(QUESTION_RESULTS_CSV, &headers);
        let (c_id, c_quiz, c_question, c_skill, c_correct) = (
            idx.require("learner_id")?,
            idx.require("quiz_id")?,
            idx.require("question_id")?,
            idx.require("skill_tag")?,
            idx.require("correct")?,
        );
        for (row, record) in reader.records().enumerate() {
            let record = record.map_err(|e| EdmError::Csv {
                file: QUESTION_RESULTS_CSV.into(),
                source: e,
            })?;
            let learner_id = field(&record, c_id).to_string();
            require_learner(QUESTION_RESULTS_CSV, row, &learner_id)?;
            let quiz_id = field(&record, c_quiz).to_string();
            if !quiz_final.contains_key(quiz_id.as_str()) {
                return Err(EdmError::DanglingKey {
                    file: QUESTION_RESULTS_CSV.into(),
                    row,
                    key: "quiz_id".into(),
                    value: quiz_id,
                });
            }
            let skill_raw = field(&record, c_skill);
            bundle.question_results.push(QuestionResult {
                learner_id,
                quiz_id,
                question_id: field(&record, c_question).to_string(),
                skill_tag: SkillTag::parse(skill_raw).ok_or_else(|| EdmError::UnknownLabel {
                    file: QUESTION_RESULTS_CSV.into(),
                    row,
                    what: "skill_tag".into(),
                    label: skill_raw.into(),
                })?,
                correct: parse_bool(
                    QUESTION_RESULTS_CSV,
                    row,
                    "correct",
                    field(&record, c_correct),
                )?,
            });
        }
    }

    bundle.sort_canonical();
    Ok(bundle)
}

/// Write a D1-shaped bundle back to the canonical five-file CSV set.
///
/// The writer emits the documented sort order, so writing a loaded bundle and
/// reloading it round-trips field-for-field (including file digests when the
/// input was already canonical).
pub fn write_canonical_csvs(bundle: &DatasetBundle, directory: &Path) -> Result<()> {
    std::fs::create_dir_all(directory).map_err(|e| EdmError::io(directory, e))?;
    let mut sorted = bundle.clone();
    sorted.sort_canonical();

    let write = |name: &str, body: Vec<u8>| -> Result<()> {
        let path = directory.join(name);
        let mut file = std::fs::File::create(&path).map_err(|e| EdmError::io(&path, e))?;
        file.write_all(&body).map_err(|e| EdmError::io(&path, e))?;
        Ok(())
    };

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "learner_id",
        "age",
        "gender",
        "ed_level",
        "ed_field",
        "native_lang",
        "motivation",
        "descr_pos",
        "descr_neg",
    ])
    .map_err(|e| EdmError::Csv {
        file: LEARNERS_CSV.into(),
        source: e,
    })?;
    for p in &sorted.profiles {
        w.write_record([
            p.learner_id.as_str(),
            &p.age.map(fmt_num).unwrap_or_default(),
            p.gender.map(|g| g.as_str()).unwrap_or(""),
            &p.ed_level.map(fmt_num).unwrap_or_default(),
            p.ed_field.map(|f| f.as_str()).unwrap_or(""),
            p.native_lang.map(bool_field).unwrap_or(""),
            p.motivation.map(|m| m.as_str()).unwrap_or(""),
            p.descr_pos.as_str(),
            p.descr_neg.as_str(),
        ])
        .map_err(|e| EdmError::Csv {
            file: LEARNERS_CSV.into(),
            source: e,
        })?;
    }
    write(LEARNERS_CSV, w.into_inner().expect("vec writer"))?;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["learner_id", "item_id", "item_kind", "action", "timestamp"])
        .map_err(|e| EdmError::Csv {
            file: EVENTS_CSV.into(),
            source: e,
        })?;
    for e in &sorted.events {
        w.write_record([
            e.learner_id.as_str(),
            e.item_id.as_str(),
            e.item_kind.as_str(),
            e.action.as_str(),
            &e.timestamp.to_string(),
        ])
        .map_err(|err| EdmError::Csv {
            file: EVENTS_CSV.into(),
            source: err,
        })?;
    }
    write(EVENTS_CSV, w.into_inner().expect("vec writer"))?;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "learner_id",
        "quiz_id",
        "grade",
        "max_grade",
        "time_started",
        "time_finished",
    ])
    .map_err(|e| EdmError::Csv {
        file: QUIZ_ATTEMPTS_CSV.into(),
        source: e,
    })?;
    for a in &sorted.quiz_attempts {
        w.write_record([
            a.learner_id.as_str(),
            a.quiz_id.as_str(),
            &fmt_num(a.grade),
            &fmt_num(a.max_grade),
            &a.time_started.to_string(),
            &a.time_finished.to_string(),
        ])
        .map_err(|e| EdmError::Csv {
            file: QUIZ_ATTEMPTS_CSV.into(),
            source: e,
        })?;
    }
    write(QUIZ_ATTEMPTS_CSV, w.into_inner().expect("vec writer"))?;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["quiz_id", "format_tag", "content_tag", "is_final"])
        .map_err(|e| EdmError::Csv {
            file: QUIZ_ITEMS_CSV.into(),
            source: e,
        })?;
    for q in &sorted.quiz_items {
        w.write_record([
            q.quiz_id.as_str(),
            q.format_tag.as_str(),
            q.content_tag.as_str(),
            bool_field(q.is_final),
        ])
        .map_err(|e| EdmError::Csv {
            file: QUIZ_ITEMS_CSV.into(),
            source: e,
        })?;
    }
    write(QUIZ_ITEMS_CSV, w.into_inner().expect("vec writer"))?;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "learner_id",
        "quiz_id",
        "question_id",
        "skill_tag",
        "correct",
    ])
    .map_err(|e| EdmError::Csv {
        file: QUESTION_RESULTS_CSV.into(),
        source: e,
    })?;
    for q in &sorted.question_results {
        w.write_record([
            q.learner_id.as_str(),
            q.quiz_id.as_str(),
            q.question_id.as_str(),
            q.skill_tag.as_str(),
            bool_field(q.correct),
        ])
        .map_err(|e| EdmError::Csv {
            file: QUESTION_RESULTS_CSV.into(),
            source: e,
        })?;
    }
    write(QUESTION_RESULTS_CSV, w.into_inner().expect("vec writer"))?;

    Ok(())
}

/// Shortest round-trip decimal form, integers without trailing `.0`.
fn fmt_num(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}
