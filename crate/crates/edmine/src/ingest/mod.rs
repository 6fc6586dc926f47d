//! Dataset loading and validation.
//!
//! Three dataset families are supported, all normalized into a
//! [`DatasetBundle`]:
//!
//! * `D1` — the collected-course format: five canonical CSVs with learner
//!   profiles, interaction events, quiz attempts, per-question results and
//!   quiz metadata (see [`d1`]).
//! * `D2` — the Open University learning-analytics tables (see [`oulad`]).
//! * `D3` — a de-identified person-course CSV (see [`canvas`]).
//!
//! Loaders are pure functions of their input files. Bundles are immutable
//! after construction and sorted by (learner_id, timestamp), so identical
//! inputs produce identical bundles.

mod bands;
mod canvas;
mod d1;
mod oulad;
mod validate;

pub use bands::BandMaps;
pub use canvas::{load_canvas, CanvasColumns};
pub use d1::{load_d1, write_canonical_csvs};
pub use oulad::{load_oulad, OuladFilter};
pub use validate::{validate_bundle, ValidationReport, Violation, ViolationKind};

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{EdmError, Result};

/// Which of the three dataset families a bundle came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DatasetId {
    D1,
    D2,
    D3,
}

impl fmt::Display for DatasetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DatasetId::D1 => write!(f, "D1"),
            DatasetId::D2 => write!(f, "D2"),
            DatasetId::D3 => write!(f, "D3"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Gender {
    F,
    M,
    Na,
}

impl Gender {
    pub fn as_str(&self) -> &'static str {
        match self {
            Gender::F => "F",
            Gender::M => "M",
            Gender::Na => "NA",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "F" => Some(Gender::F),
            "M" => Some(Gender::M),
            "NA" => Some(Gender::Na),
            _ => None,
        }
    }
}

/// Field of education, four classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EdField {
    /// Maths, computer science, engineering, technology.
    Stem,
    /// Health, biology, medicine.
    Health,
    /// Humanities, languages, arts, culture.
    Humanities,
    /// Administration, law, management, commerce.
    Admin,
}

impl EdField {
    pub const ALL: [EdField; 4] = [
        EdField::Stem,
        EdField::Health,
        EdField::Humanities,
        EdField::Admin,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            EdField::Stem => "stem",
            EdField::Health => "health",
            EdField::Humanities => "humanities",
            EdField::Admin => "admin",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "stem" => Some(EdField::Stem),
            "health" => Some(EdField::Health),
            "humanities" => Some(EdField::Humanities),
            "admin" => Some(EdField::Admin),
            _ => None,
        }
    }
}

/// Enrolment motivation, three ordered classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Motivation {
    Little,
    Moderate,
    Very,
}

impl Motivation {
    pub fn as_str(&self) -> &'static str {
        match self {
            Motivation::Little => "little",
            Motivation::Moderate => "moderate",
            Motivation::Very => "very",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "little" => Some(Motivation::Little),
            "moderate" => Some(Motivation::Moderate),
            "very" => Some(Motivation::Very),
            _ => None,
        }
    }

    /// Ordinal encoding used by the feature encoder.
    pub fn ordinal(&self) -> f64 {
        match self {
            Motivation::Little => 0.0,
            Motivation::Moderate => 1.0,
            Motivation::Very => 2.0,
        }
    }
}

/// One learner's demographic and personality record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerProfile {
    pub learner_id: String,
    pub age: Option<f64>,
    pub gender: Option<Gender>,
    /// Years after A-level, 1-8 when present.
    pub ed_level: Option<f64>,
    pub ed_field: Option<EdField>,
    pub native_lang: Option<bool>,
    pub motivation: Option<Motivation>,
    /// Free-text self descriptions; stored verbatim, never modeled.
    pub descr_pos: String,
    pub descr_neg: String,
}

impl LearnerProfile {
    pub fn empty(learner_id: impl Into<String>) -> Self {
        LearnerProfile {
            learner_id: learner_id.into(),
            age: None,
            gender: None,
            ed_level: None,
            ed_field: None,
            native_lang: None,
            motivation: None,
            descr_pos: String::new(),
            descr_neg: String::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ItemKind {
    Activity,
    Resource,
}

impl ItemKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ItemKind::Activity => "activity",
            ItemKind::Resource => "resource",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "activity" => Some(ItemKind::Activity),
            "resource" => Some(ItemKind::Resource),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ActionKind {
    View,
    Attempt,
}

impl ActionKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ActionKind::View => "view",
            ActionKind::Attempt => "attempt",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "view" => Some(ActionKind::View),
            "attempt" => Some(ActionKind::Attempt),
            _ => None,
        }
    }
}

/// One click-stream record: a learner viewed a resource or attempted an
/// activity at a given time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionEvent {
    pub learner_id: String,
    pub item_id: String,
    pub item_kind: ItemKind,
    pub action: ActionKind,
    /// UTC seconds.
    pub timestamp: i64,
}

/// One graded quiz attempt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuizAttempt {
    pub learner_id: String,
    pub quiz_id: String,
    pub grade: f64,
    pub max_grade: f64,
    pub time_started: i64,
    pub time_finished: i64,
    /// Derived from the quiz metadata at load time.
    pub is_final: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SkillTag {
    Memory,
    Deduction,
}

impl SkillTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            SkillTag::Memory => "memory",
            SkillTag::Deduction => "deduction",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "memory" => Some(SkillTag::Memory),
            "deduction" => Some(SkillTag::Deduction),
            _ => None,
        }
    }
}

/// Outcome of one quiz question for one learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionResult {
    pub learner_id: String,
    pub quiz_id: String,
    pub question_id: String,
    pub skill_tag: SkillTag,
    pub correct: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FormatTag {
    Visual,
    Verbal,
    None,
}

impl FormatTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            FormatTag::Visual => "visual",
            FormatTag::Verbal => "verbal",
            FormatTag::None => "none",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "visual" => Some(FormatTag::Visual),
            "verbal" => Some(FormatTag::Verbal),
            "none" => Some(FormatTag::None),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ContentTag {
    Factual,
    Practical,
    None,
}

impl ContentTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            ContentTag::Factual => "factual",
            ContentTag::Practical => "practical",
            ContentTag::None => "none",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "factual" => Some(ContentTag::Factual),
            "practical" => Some(ContentTag::Practical),
            "none" => Some(ContentTag::None),
            _ => None,
        }
    }
}

/// Per-quiz metadata: which material tags it covers and whether it is the
/// final exam. The final quiz carries no tags; every training quiz carries
/// exactly one format tag and one content tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuizItemMeta {
    pub quiz_id: String,
    pub format_tag: FormatTag,
    pub content_tag: ContentTag,
    pub is_final: bool,
}

/// Final outcome for datasets that do not carry a final quiz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FinalOutcome {
    /// D2: terminal pass/fail result.
    PassFail(bool),
    /// D3: completion flag plus an optional numeric grade in [0, 1].
    Completion {
        completed: bool,
        grade: Option<f64>,
    },
}

/// Pre-aggregated per-learner numbers for datasets without raw course data
/// (D2/D3). `avrg_grade` is already on the 0-10 scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerAggregate {
    pub learner_id: String,
    pub n_interactions: Option<f64>,
    pub avrg_grade: Option<f64>,
    pub outcome: Option<FinalOutcome>,
}

/// SHA-256 digest of one source file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub file: String,
    pub sha256: String,
}

/// Row-level issue recorded while loading (quarantined rows, unparseable
/// values). Echoed by [`validate_bundle`] so nothing is silently dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadIssue {
    pub file: String,
    pub row: usize,
    pub message: String,
}

/// Normalized container for one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetBundle {
    pub dataset_id: DatasetId,
    pub profiles: Vec<LearnerProfile>,
    pub events: Vec<InteractionEvent>,
    pub quiz_attempts: Vec<QuizAttempt>,
    pub question_results: Vec<QuestionResult>,
    pub quiz_items: Vec<QuizItemMeta>,
    /// Per-learner aggregates for D2/D3; empty for D1-shaped bundles.
    pub aggregates: Vec<LearnerAggregate>,
    pub provenance: Vec<FileDigest>,
    pub load_issues: Vec<LoadIssue>,
}

impl DatasetBundle {
    pub fn new(dataset_id: DatasetId) -> Self {
        DatasetBundle {
            dataset_id,
            profiles: Vec::new(),
            events: Vec::new(),
            quiz_attempts: Vec::new(),
            question_results: Vec::new(),
            quiz_items: Vec::new(),
            aggregates: Vec::new(),
            provenance: Vec::new(),
            load_issues: Vec::new(),
        }
    }

    /// Whether the bundle carries raw course data (events/quizzes) as opposed
    /// to pre-aggregated per-learner numbers.
    pub fn has_raw_course_data(&self) -> bool {
        self.dataset_id == DatasetId::D1
    }

    pub fn aggregate_for(&self, learner_id: &str) -> Option<&LearnerAggregate> {
        self.aggregates
            .iter()
            .find(|a| a.learner_id == learner_id)
    }

    /// Apply the documented canonical sort: learners by id, row tables by
    /// (learner_id, time, secondary ids).
    pub fn sort_canonical(&mut self) {
        self.profiles.sort_by(|a, b| a.learner_id.cmp(&b.learner_id));
        self.events.sort_by(|a, b| {
            (&a.learner_id, a.timestamp, &a.item_id, a.action.as_str()).cmp(&(
                &b.learner_id,
                b.timestamp,
                &b.item_id,
                b.action.as_str(),
            ))
        });
        self.quiz_attempts.sort_by(|a, b| {
            (&a.learner_id, a.time_started, &a.quiz_id, a.time_finished).cmp(&(
                &b.learner_id,
                b.time_started,
                &b.quiz_id,
                b.time_finished,
            ))
        });
        self.question_results.sort_by(|a, b| {
            (&a.learner_id, &a.quiz_id, &a.question_id).cmp(&(
                &b.learner_id,
                &b.quiz_id,
                &b.question_id,
            ))
        });
        self.quiz_items.sort_by(|a, b| a.quiz_id.cmp(&b.quiz_id));
        self.aggregates.sort_by(|a, b| a.learner_id.cmp(&b.learner_id));
        self.provenance.sort_by(|a, b| a.file.cmp(&b.file));
    }

    /// Digest over the whole bundle content; used by the experiment runners
    /// to prove inputs were not mutated.
    pub fn content_digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("bundle serializes");
        let mut hasher = Sha256::new();
        hasher.update(&json);
        hex_digest(&hasher.finalize())
    }
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    let mut out = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

pub(crate) fn digest_file(path: &Path) -> Result<FileDigest> {
    let data = std::fs::read(path).map_err(|e| EdmError::io(path, e))?;
    let mut hasher = Sha256::new();
    hasher.update(&data);
    Ok(FileDigest {
        file: path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.to_string_lossy().into_owned()),
        sha256: hex_digest(&hasher.finalize()),
    })
}

/// Open a CSV file with headers, failing with a `MissingFile` error when the
/// path does not exist.
pub(crate) fn open_csv(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    if !path.exists() {
        return Err(EdmError::MissingFile(path.to_path_buf()));
    }
    let file = std::fs::File::open(path).map_err(|e| EdmError::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(file))
}

/// Header-name → column-index map, with a fatal error listing the available
/// columns when a required one is absent.
pub(crate) struct HeaderIndex {
    file: String,
    names: Vec<String>,
}

impl HeaderIndex {
    pub fn new(file: &str, headers: &csv::StringRecord) -> Self {
        HeaderIndex {
            file: file.to_string(),
            names: headers.iter().map(|h| h.trim().to_string()).collect(),
        }
    }

    pub fn require(&self, column: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == column)
            .ok_or_else(|| EdmError::MissingColumn {
                file: self.file.clone(),
                column: column.to_string(),
                available: self.names.clone(),
            })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

pub(crate) fn field<'r>(record: &'r csv::StringRecord, idx: usize) -> &'r str {
    record.get(idx).unwrap_or("").trim()
}
