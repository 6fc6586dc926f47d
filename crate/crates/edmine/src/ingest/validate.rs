//! Bundle invariant checking.
//!
//! `validate_bundle` never mutates or fails; it reports every violation
//! class with a count and the first offender, and echoes row-level issues
//! recorded at load time.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{ContentTag, DatasetBundle, DatasetId, FormatTag, SkillTag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ViolationKind {
    /// learner_id not unique within the bundle.
    DuplicateLearner,
    /// age present but outside the declared range.
    AgeRange,
    /// ed_level present but outside [1, 8].
    EdLevelRange,
    /// grade outside [0, max_grade] or max_grade <= 0.
    GradeRange,
    /// attempt finished before it started.
    NegativeDuration,
    /// resource event with an action other than view.
    ResourceAttempt,
    /// learner_id or quiz_id that does not resolve.
    ForeignKey,
    /// final quiz carrying a material tag, or a training quiz missing one.
    QuizTagging,
    /// a quiz whose answered questions are not split between both skills.
    SkillSplit,
    /// D3 bundle carrying raw quiz data.
    UnexpectedRawData,
    /// row-level problem recorded while loading.
    LoadIssue,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            ViolationKind::DuplicateLearner => "duplicate-learner",
            ViolationKind::AgeRange => "age-range",
            ViolationKind::EdLevelRange => "ed-level-range",
            ViolationKind::GradeRange => "grade-range",
            ViolationKind::NegativeDuration => "negative-duration",
            ViolationKind::ResourceAttempt => "resource-attempt",
            ViolationKind::ForeignKey => "foreign-key",
            ViolationKind::QuizTagging => "quiz-tagging",
            ViolationKind::SkillSplit => "skill-split",
            ViolationKind::UnexpectedRawData => "unexpected-raw-data",
            ViolationKind::LoadIssue => "load-issue",
        };
        write!(f, "{name}")
    }
}

/// One violation class: how many rows hit it and what the first one was.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub count: usize,
    pub first: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub dataset: Option<DatasetId>,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn total(&self) -> usize {
        self.violations.iter().map(|v| v.count).sum()
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "clean (0 violations)");
        }
        for v in &self.violations {
            writeln!(f, "{} x{}: first at {}", v.kind, v.count, v.first)?;
        }
        Ok(())
    }
}

struct Collector {
    map: BTreeMap<ViolationKind, (usize, String)>,
}

impl Collector {
    fn new() -> Self {
        Collector {
            map: BTreeMap::new(),
        }
    }

    fn hit(&mut self, kind: ViolationKind, first: impl FnOnce() -> String) {
        let entry = self.map.entry(kind).or_insert_with(|| (0, first()));
        entry.0 += 1;
    }

    fn into_report(self, dataset: DatasetId) -> ValidationReport {
        ValidationReport {
            dataset: Some(dataset),
            violations: self
                .map
                .into_iter()
                .map(|(kind, (count, first))| Violation { kind, count, first })
                .collect(),
        }
    }
}

/// Check every type invariant on a bundle. Report-only; the bundle is never
/// touched.
pub fn validate_bundle(bundle: &DatasetBundle) -> ValidationReport {
    let mut c = Collector::new();

    let mut seen = BTreeSet::new();
    for p in &bundle.profiles {
        if !seen.insert(p.learner_id.as_str()) {
            let id = p.learner_id.clone();
            c.hit(ViolationKind::DuplicateLearner, || format!("learner {id}"));
        }
        if let Some(age) = p.age {
            let (lo, hi) = match bundle.dataset_id {
                DatasetId::D1 => (18.0, 99.0),
                // band midpoints; generous sanity range
                _ => (10.0, 99.0),
            };
            if !(lo..=hi).contains(&age) {
                let id = p.learner_id.clone();
                c.hit(ViolationKind::AgeRange, || format!("learner {id} age {age}"));
            }
        }
        if let Some(level) = p.ed_level {
            if !(1.0..=8.0).contains(&level) {
                let id = p.learner_id.clone();
                c.hit(ViolationKind::EdLevelRange, || {
                    format!("learner {id} ed_level {level}")
                });
            }
        }
    }
    let learners: BTreeSet<&str> = bundle
        .profiles
        .iter()
        .map(|p| p.learner_id.as_str())
        .collect();
    let quizzes: BTreeMap<&str, (&FormatTag, &ContentTag, bool)> = bundle
        .quiz_items
        .iter()
        .map(|q| (q.quiz_id.as_str(), (&q.format_tag, &q.content_tag, q.is_final)))
        .collect();

    for (i, e) in bundle.events.iter().enumerate() {
        if !learners.contains(e.learner_id.as_str()) {
            c.hit(ViolationKind::ForeignKey, || {
                format!("events row {i}: learner {}", e.learner_id)
            });
        }
        if e.item_kind == super::ItemKind::Resource && e.action != super::ActionKind::View {
            c.hit(ViolationKind::ResourceAttempt, || format!("events row {i}"));
        }
    }

    for (i, a) in bundle.quiz_attempts.iter().enumerate() {
        if !learners.contains(a.learner_id.as_str()) {
            c.hit(ViolationKind::ForeignKey, || {
                format!("quiz_attempts row {i}: learner {}", a.learner_id)
            });
        }
        if !quizzes.contains_key(a.quiz_id.as_str()) {
            c.hit(ViolationKind::ForeignKey, || {
                format!("quiz_attempts row {i}: quiz {}", a.quiz_id)
            });
        }
        if a.max_grade <= 0.0 || a.grade < 0.0 || a.grade > a.max_grade {
            c.hit(ViolationKind::GradeRange, || {
                format!("quiz_attempts row {i}: {}/{}", a.grade, a.max_grade)
            });
        }
        if a.time_finished < a.time_started {
            c.hit(ViolationKind::NegativeDuration, || {
                format!("quiz_attempts row {i}")
            });
        }
    }

    for (i, q) in bundle.question_results.iter().enumerate() {
        if !learners.contains(q.learner_id.as_str()) {
            c.hit(ViolationKind::ForeignKey, || {
                format!("question_results row {i}: learner {}", q.learner_id)
            });
        }
        if !quizzes.contains_key(q.quiz_id.as_str()) {
            c.hit(ViolationKind::ForeignKey, || {
                format!("question_results row {i}: quiz {}", q.quiz_id)
            });
        }
    }

    for (i, q) in bundle.quiz_items.iter().enumerate() {
        let tagged = q.format_tag != FormatTag::None || q.content_tag != ContentTag::None;
        if q.is_final && tagged {
            c.hit(ViolationKind::QuizTagging, || {
                format!("quiz_items row {i}: final quiz {} tagged", q.quiz_id)
            });
        }
        if !q.is_final && (q.format_tag == FormatTag::None || q.content_tag == ContentTag::None) {
            c.hit(ViolationKind::QuizTagging, || {
                format!("quiz_items row {i}: quiz {} missing tag", q.quiz_id)
            });
        }
    }

    // Each training quiz's answered questions must cover both skills.
    let mut skills_per_quiz: BTreeMap<&str, BTreeSet<SkillTag>> = BTreeMap::new();
    for q in &bundle.question_results {
        skills_per_quiz
            .entry(q.quiz_id.as_str())
            .or_default()
            .insert(q.skill_tag);
    }
    for (quiz, skills) in &skills_per_quiz {
        let is_final = quizzes.get(quiz).map(|(_, _, f)| *f).unwrap_or(false);
        if !is_final && skills.len() < 2 {
            c.hit(ViolationKind::SkillSplit, || format!("quiz {quiz}"));
        }
    }

    if bundle.dataset_id == DatasetId::D3
        && (!bundle.quiz_attempts.is_empty() || !bundle.question_results.is_empty())
    {
        c.hit(ViolationKind::UnexpectedRawData, || {
            "D3 bundle carries quiz records".to_string()
        });
    }

    for issue in &bundle.load_issues {
        let s = format!("{} row {}: {}", issue.file, issue.row, issue.message);
        c.hit(ViolationKind::LoadIssue, || s.clone());
    }

    c.into_report(bundle.dataset_id)
}
