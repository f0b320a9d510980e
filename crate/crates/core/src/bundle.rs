//! Versioned, self-describing model file for one global attribute.
//!
//! The bundle is pretty-printed JSON whose first field is
//! `format_version`. Floats are written in shortest round-trip form, so
//! save → load → save is byte-identical.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ensemble::PenaltyWeights;
use crate::error::{Error, Result};
use crate::ingest::{Catalog, DatasetSplit, GlobalAttributeSpec};
use crate::stats::Relevance;
use crate::tbn::TreeBayesNet;
use crate::uts::TextModel;

pub const FORMAT_VERSION: u32 = 1;

/// Where a bundle's training data came from. `split` lists every record id
/// of the train, validation and test partitions; training reads only the
/// train ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub catalog_sha256: String,
    pub labels_sha256: String,
    pub split: DatasetSplit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub format_version: u32,
    pub target: GlobalAttributeSpec,
    pub eta_requested: usize,
    pub eta: usize,
    pub selected: Vec<Relevance>,
    pub orientation: String,
    pub network: TreeBayesNet,
    pub text: TextModel,
    pub tau: f64,
    pub weights: PenaltyWeights,
    pub step: f64,
    pub provenance: Provenance,
}

impl ModelBundle {
    pub fn validate(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Version {
                found: self.format_version,
                expected: FORMAT_VERSION,
            });
        }
        self.target.validate()?;
        let node = self.network.target_node();
        if self.network.target() != self.target.name
            || node.states != self.target.states
            || node.unseen
        {
            return Err(Error::InvalidModel(
                "network target does not match the attribute spec".into(),
            ));
        }
        for r in &self.selected {
            if self.network.node(&r.name).is_none() {
                return Err(Error::InvalidModel(format!(
                    "selected characteristic `{}` missing from the network",
                    r.name
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::InvalidModel(format!(
                "threshold {} outside [0, 1]",
                self.tau
            )));
        }
        Ok(())
    }

    pub fn characteristics(&self) -> Vec<String> {
        self.selected.iter().map(|r| r.name.clone()).collect()
    }

    /// Errors with the list of selected characteristics absent from
    /// `catalog`.
    pub fn check_catalog(&self, catalog: &Catalog) -> Result<()> {
        let missing: Vec<String> = self
            .characteristics()
            .into_iter()
            .filter(|c| catalog.column_index(c).is_none())
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::MissingCharacteristics(missing))
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let found = value
            .get("format_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| Error::InvalidModel("missing format_version".into()))?;
        if found != u64::from(FORMAT_VERSION) {
            return Err(Error::Version {
                found: found as u32,
                expected: FORMAT_VERSION,
            });
        }
        let bundle: ModelBundle = serde_json::from_str(text)?;
        bundle.validate()?;
        Ok(bundle)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
