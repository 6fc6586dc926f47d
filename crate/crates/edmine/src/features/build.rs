//! Feature builders and label derivation.
//!
//! The minimal set covers demographic, academic, behavioral and personality
//! columns; the additional set holds the six learning-preference scores
//! computed from per-question results. Datasets without raw course data
//! (D2/D3) emit the subset of the minimal set their aggregates support.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{EdmError, Result};
use crate::ingest::{
    ContentTag, DatasetBundle, DatasetId, EdField, FinalOutcome, FormatTag, Gender, Motivation,
    SkillTag,
};

use super::{names, FeatureKind, FeatureMatrix, FeatureSpec, FeatureValue, Quarantine, SourceCategory};

fn gender_levels() -> Vec<String> {
    [Gender::F, Gender::M, Gender::Na]
        .iter()
        .map(|g| g.as_str().to_string())
        .collect()
}

fn ed_field_levels() -> Vec<String> {
    EdField::ALL.iter().map(|f| f.as_str().to_string()).collect()
}

fn motivation_levels() -> Vec<String> {
    [Motivation::Little, Motivation::Moderate, Motivation::Very]
        .iter()
        .map(|m| m.as_str().to_string())
        .collect()
}

struct RowBuilder {
    values: Vec<FeatureValue>,
    reasons: Vec<String>,
}

impl RowBuilder {
    fn new() -> Self {
        RowBuilder {
            values: Vec::new(),
            reasons: Vec::new(),
        }
    }

    fn push(&mut self, name: &str, value: Option<f64>) {
        match value {
            Some(v) => self.values.push(FeatureValue::Num(v)),
            None => {
                self.values.push(FeatureValue::Missing);
                self.reasons.push(format!("missing {name}"));
            }
        }
    }

    fn push_reason(&mut self, name: &str, value: Option<f64>, reason: &str) {
        match value {
            Some(v) => self.values.push(FeatureValue::Num(v)),
            None => {
                self.values.push(FeatureValue::Missing);
                self.reasons.push(reason.to_string());
                let _ = name;
            }
        }
    }

    fn push_cat(&mut self, name: &str, value: Option<String>) {
        match value {
            Some(v) => self.values.push(FeatureValue::Cat(v)),
            None => {
                self.values.push(FeatureValue::Missing);
                self.reasons.push(format!("missing {name}"));
            }
        }
    }
}

/// Per-learner raw course aggregates for a D1-shaped bundle.
struct RawCourseView<'a> {
    bundle: &'a DatasetBundle,
    /// All distinct item ids seen in the event stream.
    n_items: usize,
    items_touched: BTreeMap<&'a str, BTreeSet<&'a str>>,
    n_events: BTreeMap<&'a str, usize>,
}

impl<'a> RawCourseView<'a> {
    fn new(bundle: &'a DatasetBundle) -> Self {
        let mut items: BTreeSet<&str> = BTreeSet::new();
        let mut items_touched: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        let mut n_events: BTreeMap<&str, usize> = BTreeMap::new();
        for e in &bundle.events {
            items.insert(e.item_id.as_str());
            items_touched
                .entry(e.learner_id.as_str())
                .or_default()
                .insert(e.item_id.as_str());
            *n_events.entry(e.learner_id.as_str()).or_insert(0) += 1;
        }
        RawCourseView {
            bundle,
            n_items: items.len(),
            items_touched,
            n_events,
        }
    }

    /// Mean of grade/max over non-final attempts, rescaled to 0-10.
    fn avrg_grade(&self, learner: &str) -> Option<f64> {
        let mut sum = 0.0;
        let mut n = 0usize;
        for a in &self.bundle.quiz_attempts {
            if a.learner_id == learner && !a.is_final && a.max_grade > 0.0 {
                sum += a.grade / a.max_grade * 10.0;
                n += 1;
            }
        }
        (n > 0).then(|| sum / n as f64)
    }

    fn completion(&self, learner: &str) -> Option<f64> {
        if self.n_items == 0 {
            return None;
        }
        let touched = self
            .items_touched
            .get(learner)
            .map(|s| s.len())
            .unwrap_or(0);
        Some(touched as f64 / self.n_items as f64)
    }

    fn nb_action(&self, learner: &str) -> f64 {
        self.n_events.get(learner).copied().unwrap_or(0) as f64
    }

    /// Total dwell time over quiz attempts, in seconds. Resource views carry
    /// no duration in the canonical schema, so they contribute nothing.
    fn time(&self, learner: &str) -> f64 {
        self.bundle
            .quiz_attempts
            .iter()
            .filter(|a| a.learner_id == learner)
            .map(|a| (a.time_finished - a.time_started) as f64)
            .sum()
    }

}

/// Build the minimal feature set for a bundle. For D2/D3 only the columns
/// their aggregates support are emitted. Text fields are excluded; rows with
/// an undefined feature are flagged, never imputed.
pub fn build_minimal_features(bundle: &DatasetBundle) -> Result<FeatureMatrix> {
    match bundle.dataset_id {
        DatasetId::D1 => build_minimal_d1(bundle),
        DatasetId::D2 => build_from_aggregates(bundle, true),
        DatasetId::D3 => build_from_aggregates(bundle, false),
    }
}

fn build_minimal_d1(bundle: &DatasetBundle) -> Result<FeatureMatrix> {
    let view = RawCourseView::new(bundle);
    let specs = vec![
        FeatureSpec::numeric(names::AGE, SourceCategory::Demographic, Some((18.0, 99.0))),
        FeatureSpec {
            name: names::GENDER.into(),
            category: SourceCategory::Demographic,
            kind: FeatureKind::Categorical {
                levels: gender_levels(),
            },
            declared_range: None,
        },
        FeatureSpec {
            name: names::ED_LEVEL.into(),
            category: SourceCategory::Demographic,
            kind: FeatureKind::Ordinal { levels: None },
            declared_range: Some((1.0, 8.0)),
        },
        FeatureSpec {
            name: names::ED_FIELD.into(),
            category: SourceCategory::Demographic,
            kind: FeatureKind::Categorical {
                levels: ed_field_levels(),
            },
            declared_range: None,
        },
        FeatureSpec::numeric(names::AVRG_GRADE, SourceCategory::Academic, Some((0.0, 10.0))),
        FeatureSpec::numeric(names::COMPLETION, SourceCategory::Behavioral, Some((0.0, 1.0))),
        FeatureSpec::numeric(names::NB_ACTION, SourceCategory::Behavioral, None),
        FeatureSpec::numeric(names::TIME, SourceCategory::Behavioral, None),
        FeatureSpec {
            name: names::MOTIVATION.into(),
            category: SourceCategory::Personality,
            kind: FeatureKind::Ordinal {
                levels: Some(motivation_levels()),
            },
            declared_range: None,
        },
    ];

    let mut rows = Vec::with_capacity(bundle.profiles.len());
    let mut quarantine = Vec::new();
    let mut learner_ids = Vec::with_capacity(bundle.profiles.len());
    for p in &bundle.profiles {
        let mut rb = RowBuilder::new();
        rb.push(names::AGE, p.age);
        rb.push_cat(names::GENDER, p.gender.map(|g| g.as_str().to_string()));
        rb.push(names::ED_LEVEL, p.ed_level);
        rb.push_cat(names::ED_FIELD, p.ed_field.map(|f| f.as_str().to_string()));
        rb.push_reason(
            names::AVRG_GRADE,
            view.avrg_grade(&p.learner_id),
            "avrg_grade undefined: no non-final quiz attempts",
        );
        rb.push_reason(
            names::COMPLETION,
            view.completion(&p.learner_id),
            "%_completion undefined: course has no items",
        );
        rb.push(names::NB_ACTION, Some(view.nb_action(&p.learner_id)));
        rb.push(names::TIME, Some(view.time(&p.learner_id)));
        rb.push_cat(
            names::MOTIVATION,
            p.motivation.map(|m| m.as_str().to_string()),
        );
        for reason in rb.reasons {
            quarantine.push(Quarantine {
                learner_id: p.learner_id.clone(),
                reason,
            });
        }
        rows.push(rb.values);
        learner_ids.push(p.learner_id.clone());
    }

    Ok(FeatureMatrix {
        specs,
        learner_ids,
        rows,
        labels: None,
        quarantine,
    })
}

fn build_from_aggregates(bundle: &DatasetBundle, with_grade: bool) -> Result<FeatureMatrix> {
    let mut specs = vec![
        FeatureSpec::numeric(names::AGE, SourceCategory::Demographic, None),
        FeatureSpec {
            name: names::ED_LEVEL.into(),
            category: SourceCategory::Demographic,
            kind: FeatureKind::Ordinal { levels: None },
            declared_range: None,
        },
    ];
    if with_grade {
        specs.push(FeatureSpec::numeric(
            names::AVRG_GRADE,
            SourceCategory::Academic,
            Some((0.0, 10.0)),
        ));
    }
    specs.push(FeatureSpec::numeric(
        names::NB_ACTION,
        SourceCategory::Behavioral,
        None,
    ));

    let aggregates: BTreeMap<&str, _> = bundle
        .aggregates
        .iter()
        .map(|a| (a.learner_id.as_str(), a))
        .collect();

    let mut rows = Vec::with_capacity(bundle.profiles.len());
    let mut quarantine = Vec::new();
    let mut learner_ids = Vec::with_capacity(bundle.profiles.len());
    for p in &bundle.profiles {
        let agg = aggregates.get(p.learner_id.as_str());
        let mut rb = RowBuilder::new();
        rb.push(names::AGE, p.age);
        rb.push(names::ED_LEVEL, p.ed_level);
        if with_grade {
            rb.push_reason(
                names::AVRG_GRADE,
                agg.and_then(|a| a.avrg_grade),
                "avrg_grade undefined: no graded assessments",
            );
        }
        rb.push(names::NB_ACTION, agg.and_then(|a| a.n_interactions));
        for reason in rb.reasons {
            quarantine.push(Quarantine {
                learner_id: p.learner_id.clone(),
                reason,
            });
        }
        rows.push(rb.values);
        learner_ids.push(p.learner_id.clone());
    }

    Ok(FeatureMatrix {
        specs,
        learner_ids,
        rows,
        labels: None,
        quarantine,
    })
}

/// Build the six learning-preference scores from per-question results.
/// Requires raw course data (D1-shaped bundles).
pub fn build_additional_features(bundle: &DatasetBundle) -> Result<FeatureMatrix> {
    if bundle.quiz_items.is_empty() || bundle.question_results.is_empty() {
        return Err(EdmError::Feature(
            "additional features require question results and quiz metadata".into(),
        ));
    }
    let quiz_tags: BTreeMap<&str, (FormatTag, ContentTag, bool)> = bundle
        .quiz_items
        .iter()
        .map(|q| (q.quiz_id.as_str(), (q.format_tag, q.content_tag, q.is_final)))
        .collect();

    let columns = [
        (names::VISUAL, "visual"),
        (names::VERBAL, "verbal"),
        (names::FACTUAL, "factual"),
        (names::PRACTICAL, "practical"),
        (names::MEMORY, "memory"),
        (names::DEDUCTION, "deduction"),
    ];
    let specs: Vec<FeatureSpec> = columns
        .iter()
        .map(|(name, _)| {
            FeatureSpec::numeric(name, SourceCategory::LearningPrefs, Some((0.0, 1.0)))
        })
        .collect();

    // (correct, total) per learner per column.
    let mut tallies: BTreeMap<&str, [(usize, usize); 6]> = BTreeMap::new();
    for r in &bundle.question_results {
        let Some(&(format, content, is_final)) = quiz_tags.get(r.quiz_id.as_str()) else {
            continue;
        };
        if is_final {
            continue;
        }
        let tally = tallies.entry(r.learner_id.as_str()).or_insert([(0, 0); 6]);
        let mut add = |slot: usize| {
            tally[slot].1 += 1;
            if r.correct {
                tally[slot].0 += 1;
            }
        };
        match format {
            FormatTag::Visual => add(0),
            FormatTag::Verbal => add(1),
            FormatTag::None => {}
        }
        match content {
            ContentTag::Factual => add(2),
            ContentTag::Practical => add(3),
            ContentTag::None => {}
        }
        match r.skill_tag {
            SkillTag::Memory => add(4),
            SkillTag::Deduction => add(5),
        }
    }

    let mut rows = Vec::with_capacity(bundle.profiles.len());
    let mut quarantine = Vec::new();
    let mut learner_ids = Vec::with_capacity(bundle.profiles.len());
    for p in &bundle.profiles {
        let tally = tallies.get(p.learner_id.as_str());
        let mut row = Vec::with_capacity(6);
        for (slot, (_, tag)) in columns.iter().enumerate() {
            match tally.map(|t| t[slot]) {
                Some((correct, total)) if total > 0 => {
                    row.push(FeatureValue::Num(correct as f64 / total as f64));
                }
                _ => {
                    row.push(FeatureValue::Missing);
                    quarantine.push(Quarantine {
                        learner_id: p.learner_id.clone(),
                        reason: format!("no {tag} questions answered"),
                    });
                }
            }
        }
        rows.push(row);
        learner_ids.push(p.learner_id.clone());
    }

    Ok(FeatureMatrix {
        specs,
        learner_ids,
        rows,
        labels: None,
        quarantine,
    })
}

/// The three-column matrix shared by all datasets: age, education level and
/// an interaction count (event count for D1, clicks for D2, event count for
/// D3).
pub fn build_common_features(bundle: &DatasetBundle) -> Result<FeatureMatrix> {
    let specs = vec![
        FeatureSpec::numeric(names::AGE, SourceCategory::Demographic, None),
        FeatureSpec {
            name: names::ED_LEVEL.into(),
            category: SourceCategory::Demographic,
            kind: FeatureKind::Ordinal { levels: None },
            declared_range: None,
        },
        FeatureSpec::numeric(names::N_INTERACTIONS, SourceCategory::Behavioral, None),
    ];

    let raw = bundle.has_raw_course_data().then(|| RawCourseView::new(bundle));
    let aggregates: BTreeMap<&str, _> = bundle
        .aggregates
        .iter()
        .map(|a| (a.learner_id.as_str(), a))
        .collect();

    let mut rows = Vec::with_capacity(bundle.profiles.len());
    let mut quarantine = Vec::new();
    let mut learner_ids = Vec::with_capacity(bundle.profiles.len());
    let mut any_interaction = false;
    for p in &bundle.profiles {
        let interactions = match &raw {
            Some(view) => Some(view.nb_action(&p.learner_id)),
            None => aggregates
                .get(p.learner_id.as_str())
                .and_then(|a| a.n_interactions),
        };
        any_interaction |= interactions.is_some();
        let mut rb = RowBuilder::new();
        rb.push(names::AGE, p.age);
        rb.push(names::ED_LEVEL, p.ed_level);
        rb.push(names::N_INTERACTIONS, interactions);
        for reason in rb.reasons {
            quarantine.push(Quarantine {
                learner_id: p.learner_id.clone(),
                reason,
            });
        }
        rows.push(rb.values);
        learner_ids.push(p.learner_id.clone());
    }
    if !bundle.profiles.is_empty() && !any_interaction && raw.is_none() {
        return Err(EdmError::Feature(format!(
            "bundle {} lacks an interaction count",
            bundle.dataset_id
        )));
    }

    Ok(FeatureMatrix {
        specs,
        learner_ids,
        rows,
        labels: None,
        quarantine,
    })
}

/// How D3 outcomes are turned into labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CanvasLabelRule {
    /// Completed course ⇒ pass.
    Completed,
    /// Grade at least the given fraction ⇒ pass.
    GradeAtLeast(f64),
}

/// Labeling configuration, recorded in every report header.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelPolicy {
    /// Pass iff final grade / max grade >= this fraction (D1).
    pub pass_threshold: f64,
    pub canvas_rule: CanvasLabelRule,
}

impl Default for LabelPolicy {
    fn default() -> Self {
        LabelPolicy {
            pass_threshold: 0.5,
            canvas_rule: CanvasLabelRule::Completed,
        }
    }
}

/// Labels keyed by learner, plus the learners that could not be labeled.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelSet {
    pub labels: BTreeMap<String, u8>,
    pub quarantined: Vec<Quarantine>,
}

impl LabelSet {
    /// Share of the larger class, in [0.5, 1].
    pub fn majority_share(&self) -> Option<f64> {
        let n = self.labels.len();
        if n == 0 {
            return None;
        }
        let pass = self.labels.values().filter(|&&l| l == 1).count();
        let maj = pass.max(n - pass);
        Some(maj as f64 / n as f64)
    }
}

/// Derive binary pass/fail labels. D1 thresholds the latest final-quiz
/// grade; D2 maps the terminal result; D3 follows the configured column
/// rule. Learners without a final outcome are quarantined.
pub fn derive_labels(bundle: &DatasetBundle, policy: &LabelPolicy) -> Result<LabelSet> {
    let mut labels = BTreeMap::new();
    let mut quarantined = Vec::new();
    match bundle.dataset_id {
        DatasetId::D1 => {
            let mut finals: BTreeMap<&str, (i64, i64, f64, f64)> = BTreeMap::new();
            for a in &bundle.quiz_attempts {
                if !a.is_final {
                    continue;
                }
                let key = (a.time_finished, a.time_started, a.grade, a.max_grade);
                match finals.get(a.learner_id.as_str()) {
                    Some(existing) if (existing.0, existing.1) >= (key.0, key.1) => {}
                    _ => {
                        finals.insert(a.learner_id.as_str(), key);
                    }
                }
            }
            for p in &bundle.profiles {
                match finals.get(p.learner_id.as_str()) {
                    Some(&(_, _, grade, max)) if max > 0.0 => {
                        let pass = grade / max >= policy.pass_threshold;
                        labels.insert(p.learner_id.clone(), pass as u8);
                    }
                    _ => quarantined.push(Quarantine {
                        learner_id: p.learner_id.clone(),
                        reason: "no final quiz attempt".into(),
                    }),
                }
            }
        }
        DatasetId::D2 | DatasetId::D3 => {
            let aggregates: BTreeMap<&str, _> = bundle
                .aggregates
                .iter()
                .map(|a| (a.learner_id.as_str(), a))
                .collect();
            for p in &bundle.profiles {
                let outcome = aggregates
                    .get(p.learner_id.as_str())
                    .and_then(|a| a.outcome.as_ref());
                let label = match outcome {
                    Some(FinalOutcome::PassFail(pass)) => Some(*pass as u8),
                    Some(FinalOutcome::Completion { completed, grade }) => {
                        match policy.canvas_rule {
                            CanvasLabelRule::Completed => Some(*completed as u8),
                            CanvasLabelRule::GradeAtLeast(t) => {
                                grade.map(|g| (g >= t) as u8)
                            }
                        }
                    }
                    None => None,
                };
                match label {
                    Some(l) => {
                        labels.insert(p.learner_id.clone(), l);
                    }
                    None => quarantined.push(Quarantine {
                        learner_id: p.learner_id.clone(),
                        reason: "no final outcome".into(),
                    }),
                }
            }
        }
    }
    Ok(LabelSet {
        labels,
        quarantined,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::names;
    use crate::ingest::{
        ActionKind, InteractionEvent, ItemKind, LearnerProfile, QuizAttempt, QuizItemMeta,
    };

    fn quiz(quiz_id: &str, format: FormatTag, content: ContentTag, is_final: bool) -> QuizItemMeta {
        QuizItemMeta {
            quiz_id: quiz_id.into(),
            format_tag: format,
            content_tag: content,
            is_final,
        }
    }

    fn attempt(learner: &str, quiz: &str, grade: f64, t0: i64, t1: i64, is_final: bool) -> QuizAttempt {
        QuizAttempt {
            learner_id: learner.into(),
            quiz_id: quiz.into(),
            grade,
            max_grade: 10.0,
            time_started: t0,
            time_finished: t1,
            is_final,
        }
    }

    fn view(learner: &str, item: &str, t: i64) -> InteractionEvent {
        InteractionEvent {
            learner_id: learner.into(),
            item_id: item.into(),
            item_kind: ItemKind::Resource,
            action: ActionKind::View,
            timestamp: t,
        }
    }

    fn attempt_event(learner: &str, item: &str, t: i64) -> InteractionEvent {
        InteractionEvent {
            learner_id: learner.into(),
            item_id: item.into(),
            item_kind: ItemKind::Activity,
            action: ActionKind::Attempt,
            timestamp: t,
        }
    }

    fn question(learner: &str, quiz: &str, id: &str, skill: SkillTag, correct: bool) -> QuestionResult {
        QuestionResult {
            learner_id: learner.into(),
            quiz_id: quiz.into(),
            question_id: id.into(),
            skill_tag: skill,
            correct,
        }
    }

    use crate::ingest::QuestionResult;

    /// Hand-built course: four tagged quizzes plus a final, four learners.
    ///
    /// * `a` — fully complete; avrg_grade 8.0, nb_action 17, completion 0.9,
    ///   verbal 0.75, memory 1.0, final 7/10.
    /// * `b` — complete, touches the one item `a` missed; final exactly at
    ///   the 0.5 threshold.
    /// * `c` — answered no practical questions, no final attempt.
    /// * `d` — final attempt only (no non-final grades).
    fn fixture() -> DatasetBundle {
        let mut bundle = DatasetBundle::new(DatasetId::D1);
        bundle.quiz_items = vec![
            quiz("vis_fact", FormatTag::Visual, ContentTag::Factual, false),
            quiz("vis_prac", FormatTag::Visual, ContentTag::Practical, false),
            quiz("verb_fact", FormatTag::Verbal, ContentTag::Factual, false),
            quiz("verb_prac", FormatTag::Verbal, ContentTag::Practical, false),
            quiz("final", FormatTag::None, ContentTag::None, true),
        ];
        for (i, learner) in ["a", "b", "c", "d"].iter().enumerate() {
            let mut profile = LearnerProfile::empty(*learner);
            profile.age = Some(25.0 + i as f64);
            profile.gender = Some(Gender::F);
            profile.ed_level = Some(3.0);
            profile.ed_field = Some(EdField::Stem);
            profile.native_lang = Some(true);
            profile.motivation = Some(Motivation::Very);
            bundle.profiles.push(profile);
        }

        // learner a: 12 views over r1..r5 plus 5 activity attempts touching
        // 4 distinct activities = 9 distinct items of the course's 10
        let mut t = 0;
        for item in ["r1", "r1", "r1", "r1", "r2", "r2", "r3", "r3", "r4", "r4", "r5", "r5"] {
            bundle.events.push(view("a", item, t));
            t += 10;
        }
        for item in ["vis_fact", "vis_prac", "verb_fact", "final", "vis_fact"] {
            bundle.events.push(attempt_event("a", item, t));
            t += 10;
        }
        // learner b puts the tenth item into the universe
        bundle.events.push(attempt_event("b", "verb_prac", t));

        // a: non-final grades 8, 6, 10 and a 7/10 final; dwell 450s total
        bundle.quiz_attempts.extend([
            attempt("a", "vis_fact", 8.0, 0, 100, false),
            attempt("a", "vis_prac", 6.0, 200, 350, false),
            attempt("a", "verb_fact", 10.0, 400, 500, false),
            attempt("a", "final", 7.0, 600, 700, true),
        ]);
        // b: one non-final grade, final exactly at threshold
        bundle.quiz_attempts.extend([
            attempt("b", "verb_prac", 4.0, 0, 60, false),
            attempt("b", "final", 5.0, 100, 160, true),
        ]);
        // c: non-final work but no final attempt
        bundle.quiz_attempts.push(attempt("c", "vis_fact", 9.0, 0, 30, false));
        // d: final attempt only
        bundle.quiz_attempts.push(attempt("d", "final", 2.0, 0, 30, true));

        // question results
        bundle.question_results.extend([
            // a on verb_fact: 3 of 4 correct; both memory questions right
            question("a", "verb_fact", "q1", SkillTag::Memory, true),
            question("a", "verb_fact", "q2", SkillTag::Memory, true),
            question("a", "verb_fact", "q3", SkillTag::Deduction, true),
            question("a", "verb_fact", "q4", SkillTag::Deduction, false),
            // a on vis_prac: memory right, deduction wrong
            question("a", "vis_prac", "q1", SkillTag::Memory, true),
            question("a", "vis_prac", "q2", SkillTag::Deduction, false),
            // b covers every tag
            question("b", "vis_fact", "q1", SkillTag::Memory, true),
            question("b", "vis_fact", "q2", SkillTag::Deduction, false),
            question("b", "verb_prac", "q1", SkillTag::Memory, false),
            question("b", "verb_prac", "q2", SkillTag::Deduction, true),
            // c never answers a practical question
            question("c", "vis_fact", "q1", SkillTag::Memory, true),
            question("c", "verb_fact", "q2", SkillTag::Deduction, true),
        ]);
        bundle.sort_canonical();
        bundle
    }

    fn value(matrix: &FeatureMatrix, learner: &str, feature: &str) -> f64 {
        let row = matrix
            .learner_ids
            .iter()
            .position(|id| id == learner)
            .expect("learner present");
        let col = matrix.spec_index(feature).expect("feature present");
        matrix.rows[row][col].as_num().expect("numeric value")
    }

    #[test]
    fn minimal_features_match_hand_computation() {
        let bundle = fixture();
        let matrix = build_minimal_features(&bundle).unwrap();
        assert_eq!(value(&matrix, "a", names::AVRG_GRADE), 8.0);
        assert_eq!(value(&matrix, "a", names::NB_ACTION), 17.0);
        assert_eq!(value(&matrix, "a", names::COMPLETION), 0.9);
        assert_eq!(value(&matrix, "a", names::TIME), 450.0);
    }

    #[test]
    fn learner_without_nonfinal_attempts_is_quarantined() {
        let bundle = fixture();
        let matrix = build_minimal_features(&bundle).unwrap();
        assert!(matrix
            .quarantine
            .iter()
            .any(|q| q.learner_id == "d" && q.reason.contains("avrg_grade")));
    }

    #[test]
    fn additional_features_match_hand_computation() {
        let bundle = fixture();
        let matrix = build_additional_features(&bundle).unwrap();
        assert_eq!(value(&matrix, "a", names::VERBAL), 0.75);
        assert_eq!(value(&matrix, "a", names::MEMORY), 1.0);
        assert_eq!(value(&matrix, "a", names::VISUAL), 0.5);
        assert_eq!(value(&matrix, "a", names::FACTUAL), 0.75);
        assert_eq!(value(&matrix, "a", names::PRACTICAL), 0.5);
        assert!((value(&matrix, "a", names::DEDUCTION) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn skipping_every_practical_quiz_quarantines_with_tag_named() {
        let bundle = fixture();
        let matrix = build_additional_features(&bundle).unwrap();
        assert!(matrix
            .quarantine
            .iter()
            .any(|q| q.learner_id == "c" && q.reason.contains("practical")));
    }

    #[test]
    fn labels_threshold_at_half_inclusive() {
        let bundle = fixture();
        let labels = derive_labels(&bundle, &LabelPolicy::default()).unwrap();
        // 7/10 over the threshold
        assert_eq!(labels.labels["a"], 1);
        // exactly at the threshold passes (>= rule)
        assert_eq!(labels.labels["b"], 1);
        assert_eq!(labels.labels["d"], 0);
        assert!(labels
            .quarantined
            .iter()
            .any(|q| q.learner_id == "c" && q.reason.contains("final")));
    }

    #[test]
    fn filter_complete_keeps_only_fully_labeled_rows() {
        let bundle = fixture();
        let minimal = build_minimal_features(&bundle).unwrap();
        let additional = build_additional_features(&bundle).unwrap();
        let labels = derive_labels(&bundle, &LabelPolicy::default()).unwrap();
        let full = minimal.join(&additional).unwrap().with_labels(&labels);
        let (complete, removed) = full.filter_complete();
        assert_eq!(complete.learner_ids, vec!["a", "b"]);
        assert_eq!(removed.len(), 2);
        let (again, removed_again) = complete.filter_complete();
        assert_eq!(again, complete);
        assert!(removed_again.is_empty());
    }

    #[test]
    fn permuting_profiles_permutes_rows_and_labels_together() {
        let mut bundle = fixture();
        let matrix_a = build_minimal_features(&bundle).unwrap();
        bundle.profiles.reverse();
        let matrix_b = build_minimal_features(&bundle).unwrap();
        assert_eq!(matrix_b.learner_ids, {
            let mut ids = matrix_a.learner_ids.clone();
            ids.reverse();
            ids
        });
        for learner in ["a", "b", "c", "d"] {
            assert_eq!(
                value(&matrix_a, learner, names::NB_ACTION),
                value(&matrix_b, learner, names::NB_ACTION)
            );
        }
    }

    #[test]
    fn d2_style_bundles_emit_the_aggregate_subset() {
        let mut bundle = DatasetBundle::new(DatasetId::D2);
        let mut profile = LearnerProfile::empty("s1");
        profile.age = Some(26.0);
        profile.ed_level = Some(3.0);
        bundle.profiles.push(profile);
        bundle.aggregates.push(crate::ingest::LearnerAggregate {
            learner_id: "s1".into(),
            n_interactions: Some(120.0),
            avrg_grade: Some(7.5),
            outcome: Some(crate::ingest::FinalOutcome::PassFail(true)),
        });
        let matrix = build_minimal_features(&bundle).unwrap();
        let spec_names: Vec<&str> = matrix.specs.iter().map(|s| s.name.as_str()).collect();
        assert_eq!(
            spec_names,
            vec![names::AGE, names::ED_LEVEL, names::AVRG_GRADE, names::NB_ACTION]
        );
        assert_eq!(value(&matrix, "s1", names::AVRG_GRADE), 7.5);
        let labels = derive_labels(&bundle, &LabelPolicy::default()).unwrap();
        assert_eq!(labels.labels["s1"], 1);
    }
}
