//! Run configuration: JSON schema, flag precedence, and the run manifest.
//!
//! Precedence is command line > config file > documented default. The
//! resolved configuration, the root seed and the input digests together form
//! the run manifest; its SHA-256 digest stamps every output file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{EdmError, Result};
use crate::features::{CanvasLabelRule, LabelPolicy};
use crate::ingest::{self, BandMaps, DatasetBundle};
use crate::learners::Averaging;
use crate::resample::{BalanceScope, BalanceSpec, BalanceTechnique};
use crate::synthgen::{self, PlantSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Balancing,
    Models,
    Sources,
    Transfer,
    Selection,
    Describe,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::Balancing => "balancing",
            ExperimentKind::Models => "models",
            ExperimentKind::Sources => "sources",
            ExperimentKind::Transfer => "transfer",
            ExperimentKind::Selection => "selection",
            ExperimentKind::Describe => "describe",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "balancing" => Some(ExperimentKind::Balancing),
            "models" => Some(ExperimentKind::Models),
            "sources" => Some(ExperimentKind::Sources),
            "transfer" => Some(ExperimentKind::Transfer),
            "selection" => Some(ExperimentKind::Selection),
            "describe" => Some(ExperimentKind::Describe),
            _ => None,
        }
    }
}

/// Where one dataset comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetConfig {
    /// Generated in-process from a plant spec.
    Synthetic {
        #[serde(flatten)]
        spec: PlantSpec,
    },
    /// Canonical five-CSV directory.
    D1Dir { path: PathBuf },
    /// Published learning-analytics table directory.
    OuladDir { path: PathBuf },
    /// De-identified person-course CSV.
    CanvasCsv { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BalanceConfig {
    pub technique: BalanceTechnique,
    /// Balance RNG root; defaults to the run seed when absent.
    pub seed: Option<u64>,
    pub smote_k: usize,
    pub scope: BalanceScope,
}

impl Default for BalanceConfig {
    fn default() -> Self {
        BalanceConfig {
            technique: BalanceTechnique::UpAndDown,
            seed: None,
            smote_k: 5,
            scope: BalanceScope::TrainFolds,
        }
    }
}

impl BalanceConfig {
    pub fn to_spec(&self, root_seed: u64) -> BalanceSpec {
        BalanceSpec {
            technique: self.technique,
            seed: self.seed.unwrap_or(root_seed),
            smote_k: self.smote_k,
            scope: self.scope,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourcesConfig {
    pub dataset: String,
    /// Category letters, e.g. "DAB" or "DABPL".
    pub categories: String,
}

impl Default for SourcesConfig {
    fn default() -> Self {
        SourcesConfig {
            dataset: "d1".into(),
            categories: "DABPL".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub dataset: String,
    /// Cap on wrapper set size; `None` stops at no-improvement.
    pub max_k: Option<usize>,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            dataset: "d1".into(),
            max_k: None,
        }
    }
}

fn default_seed() -> u64 {
    7
}

fn default_folds() -> usize {
    10
}

fn default_true() -> bool {
    true
}

fn default_threshold() -> f64 {
    0.5
}

fn default_canvas_rule() -> CanvasLabelRule {
    CanvasLabelRule::Completed
}

fn default_averaging() -> Averaging {
    Averaging::Macro
}

fn default_describe_dataset() -> String {
    "d1".into()
}

/// Full experiment configuration; everything has a documented default so a
/// minimal config file still runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default)]
    pub balance: BalanceConfig,
    #[serde(default = "default_averaging")]
    pub averaging: Averaging,
    #[serde(default = "default_threshold")]
    pub pass_threshold: f64,
    #[serde(default = "default_canvas_rule")]
    pub canvas_rule: CanvasLabelRule,
    /// Grid-search hyperparameters per cell; `false` uses family defaults.
    #[serde(default = "default_true")]
    pub grid_search: bool,
    #[serde(default)]
    pub jobs: Option<usize>,
    #[serde(default)]
    pub datasets: BTreeMap<String, DatasetConfig>,
    #[serde(default)]
    pub sources: SourcesConfig,
    #[serde(default)]
    pub selection: SelectionConfig,
    #[serde(default = "default_describe_dataset")]
    pub describe_dataset: String,
    /// Optional band-map sidecar override.
    #[serde(default)]
    pub band_maps: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults deserialize")
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| EdmError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(EdmError::Config(format!(
                "folds must be >= 2, got {}",
                self.folds
            )));
        }
        if !(0.0..=1.0).contains(&self.pass_threshold) {
            return Err(EdmError::Config(format!(
                "pass_threshold must be in [0, 1], got {}",
                self.pass_threshold
            )));
        }
        if self.balance.smote_k < 1 {
            return Err(EdmError::Config("balance.smote_k must be >= 1".into()));
        }
        Ok(())
    }

    pub fn label_policy(&self) -> LabelPolicy {
        LabelPolicy {
            pass_threshold: self.pass_threshold,
            canvas_rule: self.canvas_rule,
        }
    }

    pub fn balance_spec(&self) -> BalanceSpec {
        self.balance.to_spec(self.seed)
    }

    /// SHA-256 over the canonical JSON form; changes when any field changes.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(&json);
        ingest::hex_digest(&hasher.finalize())
    }

    /// Load or generate one dataset. When the config has no entry for `id`,
    /// fall back to conventional paths under `EDM_DATA_DIR`.
    pub fn load_dataset(&self, id: &str) -> Result<DatasetBundle> {
        let bands = match &self.band_maps {
            Some(path) => BandMaps::from_path(path)?,
            None => BandMaps::builtin(),
        };
        let entry = match self.datasets.get(id) {
            Some(entry) => entry.clone(),
            None => fallback_dataset(id)?,
        };
        match entry {
            DatasetConfig::Synthetic { spec } => Ok(synthgen::generate_bundle(&spec)?.0),
            DatasetConfig::D1Dir { path } => ingest::load_d1(&path),
            DatasetConfig::OuladDir { path } => {
                ingest::load_oulad(&path, &bands, &Default::default())
            }
            DatasetConfig::CanvasCsv { path } => {
                ingest::load_canvas(&path, &bands, &Default::default())
            }
        }
    }
}

/// Conventional layout under `$EDM_DATA_DIR`: `d1/` (canonical CSVs),
/// `oulad/`, and `canvas.csv`.
fn fallback_dataset(id: &str) -> Result<DatasetConfig> {
    let base = std::env::var_os("EDM_DATA_DIR").ok_or_else(|| {
        EdmError::Config(format!(
            "dataset `{id}` not in config and EDM_DATA_DIR is unset"
        ))
    })?;
    let base = PathBuf::from(base);
    let candidate = match id {
        "d1" => DatasetConfig::D1Dir {
            path: base.join("d1"),
        },
        "d2" => DatasetConfig::OuladDir {
            path: base.join("oulad"),
        },
        "d3" => DatasetConfig::CanvasCsv {
            path: base.join("canvas.csv"),
        },
        other => {
            return Err(EdmError::Config(format!(
                "dataset `{other}` not in config and has no conventional EDM_DATA_DIR path"
            )))
        }
    };
    Ok(candidate)
}

/// Command-line overrides; `None` means "not given".
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OverrideFlags {
    pub seed: Option<u64>,
    pub folds: Option<usize>,
    pub balance: Option<BalanceTechnique>,
    pub jobs: Option<usize>,
}

/// Apply command-line overrides on top of a loaded config.
pub fn apply_overrides(mut config: ExperimentConfig, flags: &OverrideFlags) -> ExperimentConfig {
    if let Some(seed) = flags.seed {
        config.seed = seed;
    }
    if let Some(folds) = flags.folds {
        config.folds = folds;
    }
    if let Some(technique) = flags.balance {
        config.balance.technique = technique;
    }
    if let Some(jobs) = flags.jobs {
        config.jobs = Some(jobs);
    }
    config
}

/// Everything needed to reproduce a run byte-for-byte.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub experiment: ExperimentKind,
    pub root_seed: u64,
    pub config: ExperimentConfig,
    pub config_digest: String,
    /// Dataset id → bundle content digest.
    pub input_digests: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(
        experiment: ExperimentKind,
        config: &ExperimentConfig,
        input_digests: BTreeMap<String, String>,
    ) -> Self {
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            experiment,
            root_seed: config.seed,
            config: config.clone(),
            config_digest: config.digest(),
            input_digests,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn provenance(&self) -> super::report::Provenance {
        let mut p = super::report::Provenance::default();
        p.push("generated-by", format!("edmine v{}", self.tool_version));
        p.push("experiment", self.experiment.as_str());
        p.push("config-digest", self.config_digest.clone());
        p.push("root-seed", self.root_seed.to_string());
        p.push(
            "balance",
            format!(
                "{}/{}",
                self.config.balance.technique.as_str(),
                self.config.balance.scope.as_str()
            ),
        );
        p.push("averaging", self.config.averaging.as_str());
        p.push("pass-threshold", self.config.pass_threshold.to_string());
        for (id, digest) in &self.input_digests {
            p.push(&format!("input-{id}"), digest.clone());
        }
        p
    }
}
