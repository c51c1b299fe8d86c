//! Weighted forest ensembles and the model file format.
//!
//! A model file is a single JSON document:
//!
//! ```text
//! { "format_version": 1, "model": { "schema": ..., "kind": ..., "entries": [...], "log": ... } }
//! ```
//!
//! Floats are written in shortest round-trip form, so loading and saving
//! again reproduces the file byte for byte.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{MetaForestsConfig, MetaTaskLog};
use crate::data::{DatasetSchema, MultiDomainDataset};
use crate::forest::{argmax, fit_forest_refs, Forest, ForestConfig};
use crate::{Error, Result};

pub const MODEL_FORMAT_VERSION: u64 = 1;

/// How a forest came to be part of the ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    /// A plain forest trained on all source domains pooled.
    Baseline { source_domains: Vec<String> },
    MetaTask {
        iteration: usize,
        meta_train_domain: String,
        meta_test_domain: String,
    },
}

/// Training configuration snapshot stored with the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", content = "config", rename_all = "snake_case")]
pub enum ModelKind {
    BaselineRf(ForestConfig),
    MetaForests(MetaForestsConfig),
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::BaselineRf(_) => "baseline_rf",
            ModelKind::MetaForests(_) => "meta_forests",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelKind::BaselineRf(c) => c.validate(),
            ModelKind::MetaForests(c) => c.validate(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleEntry {
    pub forest: Forest,
    pub weight: f64,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedEnsemble {
    /// Schema of the training sources; its domain list names the domains
    /// the model has seen.
    schema: DatasetSchema,
    kind: ModelKind,
    entries: Vec<EnsembleEntry>,
    log: Option<MetaTaskLog>,
}

impl WeightedEnsemble {
    pub fn new(
        schema: DatasetSchema,
        kind: ModelKind,
        entries: Vec<EnsembleEntry>,
        log: Option<MetaTaskLog>,
    ) -> Result<Self> {
        let e = Self {
            schema,
            kind,
            entries,
            log,
        };
        e.check().map_err(|m| Error::InvalidSchema(m.to_string()))?;
        Ok(e)
    }

    fn check(&self) -> std::result::Result<(), String> {
        if self.entries.is_empty() {
            return Err("ensemble has no forests".into());
        }
        let mut total = 0.0;
        for e in &self.entries {
            if !(e.weight >= 0.0 && e.weight.is_finite()) {
                return Err(format!("invalid weight {}", e.weight));
            }
            if e.forest.feature_count() != self.schema.feature_count()
                || e.forest.class_count() != self.schema.class_count()
            {
                return Err("forest dimensions disagree with the schema".into());
            }
            total += e.weight;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(format!("weights sum to {total}, expected 1"));
        }
        Ok(())
    }

    pub fn schema(&self) -> &DatasetSchema {
        &self.schema
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn entries(&self) -> &[EnsembleEntry] {
        &self.entries
    }

    pub fn log(&self) -> Option<&MetaTaskLog> {
        self.log.as_ref()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.weight).collect()
    }

    pub fn source_domains(&self) -> &[String] {
        self.schema.domain_names()
    }

    pub fn tree_count(&self) -> usize {
        self.entries.iter().map(|e| e.forest.trees().len()).sum()
    }

    /// Shannon entropy (nats) of the weight vector.
    pub fn weight_entropy(&self) -> f64 {
        0.0 - self
            .entries
            .iter()
            .filter(|e| e.weight > 0.0)
            .map(|e| e.weight * e.weight.ln())
            .sum::<f64>()
    }

    /// Weighted average of the forests' class distributions, and its argmax.
    pub fn predict_ensemble(&self, x: &[f64]) -> Result<(usize, Vec<f64>)> {
        let mut dist = vec![0.0; self.schema.class_count()];
        for e in &self.entries {
            e.forest.accumulate_proba(x, e.weight, &mut dist)?;
        }
        Ok((argmax(&dist), dist))
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(self.predict_ensemble(x)?.0)
    }
}

/// Trains one unweighted forest on all source domains pooled.
pub fn train_baseline(
    sources: &MultiDomainDataset,
    config: &ForestConfig,
) -> Result<WeightedEnsemble> {
    let samples = sources.pooled();
    let pool: BTreeSet<usize> = (0..sources.schema().feature_count()).collect();
    let forest = fit_forest_refs(&samples, sources.schema().class_count(), &pool, config)?;
    WeightedEnsemble::new(
        sources.schema().clone(),
        ModelKind::BaselineRf(*config),
        vec![EnsembleEntry {
            forest,
            weight: 1.0,
            provenance: Provenance::Baseline {
                source_domains: sources.schema().domain_names().to_vec(),
            },
        }],
        None,
    )
}

#[derive(Serialize)]
struct ModelFileOut<'a> {
    format_version: u64,
    model: &'a WeightedEnsemble,
}

#[derive(Deserialize)]
struct ModelFileIn {
    model: WeightedEnsemble,
}

pub fn write_model<W: std::io::Write>(ensemble: &WeightedEnsemble, writer: W) -> Result<()> {
    let doc = ModelFileOut {
        format_version: MODEL_FORMAT_VERSION,
        model: ensemble,
    };
    serde_json::to_writer(writer, &doc)
        .map_err(|e| Error::CorruptFile(format!("cannot serialize model: {e}")))
}

pub fn save_model(ensemble: &WeightedEnsemble, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_model(ensemble, &mut buf)?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn read_model(bytes: &[u8]) -> Result<WeightedEnsemble> {
    let value: serde_json::Value =
        serde_json::from_slice(bytes).map_err(|e| Error::CorruptFile(e.to_string()))?;
    let version = value
        .get("format_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| Error::CorruptFile("missing `format_version`".into()))?;
    if version != MODEL_FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            supported: MODEL_FORMAT_VERSION,
        });
    }
    let file: ModelFileIn =
        serde_json::from_value(value).map_err(|e| Error::CorruptFile(e.to_string()))?;
    let model = file.model;
    model.check().map_err(Error::CorruptFile)?;
    for e in &model.entries {
        e.forest.validate()?;
    }
    Ok(model)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<WeightedEnsemble> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    read_model(&bytes)
}
