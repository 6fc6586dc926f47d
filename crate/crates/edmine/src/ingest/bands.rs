//! Band-label → ordinal mapping tables.
//!
//! Public datasets report age and education as coarse text bands. The
//! mapping to numbers is deliberately external data, not code: it ships as a
//! versioned JSON sidecar (`data/band_maps.json`, embedded as the default)
//! and can be overridden per run, so unusual band labels in a download are a
//! mapping-file edit rather than a code change. A `null` midpoint marks a
//! band as "no answer".

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{EdmError, Result};

const DEFAULT_JSON: &str = include_str!("../../data/band_maps.json");

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetBands {
    pub age_band_midpoints: BTreeMap<String, Option<f64>>,
    pub education_ordinal: BTreeMap<String, Option<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BandMaps {
    pub version: u32,
    pub oulad: DatasetBands,
    pub canvas: DatasetBands,
}

impl BandMaps {
    /// The mapping table embedded in the crate.
    pub fn builtin() -> Self {
        serde_json::from_str(DEFAULT_JSON).expect("embedded band map parses")
    }

    /// Load an override sidecar from disk.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| EdmError::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

impl Default for BandMaps {
    fn default() -> Self {
        Self::builtin()
    }
}

impl DatasetBands {
    /// Resolve an age band to its midpoint. `Ok(None)` means "declined to
    /// answer"; an unknown label is fatal with the label echoed.
    pub fn age(&self, file: &str, row: usize, label: &str) -> Result<Option<f64>> {
        if label.is_empty() {
            return Ok(None);
        }
        match self.age_band_midpoints.get(label) {
            Some(v) => Ok(*v),
            None => Err(EdmError::UnknownLabel {
                file: file.to_string(),
                row,
                what: "age band".into(),
                label: label.to_string(),
            }),
        }
    }

    /// Resolve an education band to its ordinal.
    pub fn education(&self, file: &str, row: usize, label: &str) -> Result<Option<f64>> {
        if label.is_empty() {
            return Ok(None);
        }
        match self.education_ordinal.get(label) {
            Some(v) => Ok(*v),
            None => Err(EdmError::UnknownLabel {
                file: file.to_string(),
                row,
                what: "education band".into(),
                label: label.to_string(),
            }),
        }
    }
}
