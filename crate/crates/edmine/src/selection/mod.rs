//! Wrapper and filter feature selection.
//!
//! Wrappers ([`forward_elimination`], [`backward_elimination`], [`rfe`],
//! [`rfe_cv`]) score candidate feature sets by cross-validated accuracy of a
//! frozen inner model and operate on spec units, so one-hot groups enter and
//! leave atomically. Filters ([`anova_f`], [`kendall_tau`],
//! [`pearson_matrix`]) are model-free per-column statistics.

mod filters;
mod wrappers;

pub use filters::{anova_f, kendall_tau, pearson_matrix, tau_b, FilterScore, PearsonMatrix};
pub use wrappers::{
    backward_elimination, forward_elimination, rfe, rfe_cv, RfeCvCurvePoint, WrapperConfig,
};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum SelectionMethod {
    Fe,
    Be,
    Rfe,
    RfeCv,
    Anova,
    Kendall,
}

impl SelectionMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            SelectionMethod::Fe => "FE",
            SelectionMethod::Be => "BE",
            SelectionMethod::Rfe => "RFE",
            SelectionMethod::RfeCv => "RFECV",
            SelectionMethod::Anova => "ANOVA",
            SelectionMethod::Kendall => "KENDALL",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepAction {
    Added,
    Removed,
}

/// One wrapper step: which feature moved and the score that justified it.
/// For FE/BE the score is CV accuracy of the set after the move; for RFE it
/// is the importance of the removed feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionStep {
    pub feature: String,
    pub score: f64,
    pub action: StepAction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub method: SelectionMethod,
    /// Chosen feature names. FE: in addition order; BE/RFE: survivors in
    /// manifest order. Filters: all features ranked best-first.
    pub selected: Vec<String>,
    pub steps: Vec<SelectionStep>,
    pub chosen_k: Option<usize>,
    /// Per-feature scores for filter methods; `None` marks an undefined
    /// statistic (explained in `flags`).
    pub feature_scores: Vec<(String, Option<f64>)>,
    pub flags: Vec<String>,
}

impl SelectionResult {
    /// `step,feature,score,action` rows.
    pub fn steps_csv(&self) -> String {
        let mut out = String::from("step,feature,score,action\n");
        for (i, s) in self.steps.iter().enumerate() {
            let action = match s.action {
                StepAction::Added => "added",
                StepAction::Removed => "removed",
            };
            out.push_str(&format!("{i},{},{},{action}\n", s.feature, s.score));
        }
        out
    }

    /// `feature,score` rows for filter rankings; empty score = undefined.
    pub fn scores_csv(&self) -> String {
        let mut out = String::from("feature,score\n");
        for (name, score) in &self.feature_scores {
            match score {
                Some(v) => out.push_str(&format!("{name},{v}\n")),
                None => out.push_str(&format!("{name},\n")),
            }
        }
        out
    }

    pub fn summary_json(&self) -> String {
        serde_json::json!({
            "method": self.method.as_str(),
            "chosen_k": self.chosen_k,
            "selected": self.selected,
            "flags": self.flags,
        })
        .to_string()
    }
}
