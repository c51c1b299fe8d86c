//! Leave-one-domain-out evaluation.
//!
//! Run `(target domain t, repeat r)` of an algorithm is seeded with
//! `mix(base_seed, t, r)` where `t` is the domain's position in the
//! dataset schema. Algorithms compared with the same base seed therefore
//! see identical folds and seeds.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::MultiDomainDataset;
use crate::forest::ForestConfig;
use crate::meta::{run_meta_learning, train_baseline, MetaForestsConfig, WeightedEnsemble};

/// Algorithm choice plus its configuration; the same type is stored in model files.
pub use crate::meta::ModelKind as AlgorithmConfig;
use crate::seed::mix;
use crate::{Error, Result};

pub const REPORT_FORMAT_VERSION: u64 = 1;

/// Fraction of positions where the two label lists agree.
pub fn accuracy(predictions: &[usize], truth: &[usize]) -> Result<f64> {
    if predictions.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: predictions.len(),
            right: truth.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::EmptyInput);
    }
    let hits = predictions
        .iter()
        .zip(truth)
        .filter(|(p, t)| p == t)
        .count();
    Ok(hits as f64 / truth.len() as f64)
}

/// Anything that can be trained on source domains and then predict.
pub trait Learner: Sync {
    fn fit(&self, sources: &MultiDomainDataset, seed: u64) -> Result<WeightedEnsemble>;

    /// Minimum number of domains (sources plus target) the learner needs.
    fn min_domains(&self) -> usize {
        2
    }
}

impl Learner for AlgorithmConfig {
    fn fit(&self, sources: &MultiDomainDataset, seed: u64) -> Result<WeightedEnsemble> {
        match self {
            AlgorithmConfig::BaselineRf(cfg) => {
                let cfg = ForestConfig {
                    master_seed: seed,
                    ..*cfg
                };
                train_baseline(sources, &cfg)
            }
            AlgorithmConfig::MetaForests(cfg) => {
                let cfg = MetaForestsConfig {
                    master_seed: seed,
                    ..cfg.clone()
                };
                Ok(run_meta_learning(sources, &cfg)?.0)
            }
        }
    }

    fn min_domains(&self) -> usize {
        match self {
            AlgorithmConfig::BaselineRf(_) => 2,
            AlgorithmConfig::MetaForests(_) => 3,
        }
    }
}

/// Total trees meta-forests grows on `source_domains` sources:
/// iterations x (sources - 1) forests x trees per forest.
pub fn matched_tree_budget(config: &MetaForestsConfig, source_domains: usize) -> usize {
    config.iterations_for(source_domains) * source_domains.saturating_sub(1) * config.forest.n_trees
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Row label in reports, e.g. `meta_forests`.
    pub name: String,
    pub algorithm: AlgorithmConfig,
    pub repeats: usize,
    pub base_seed: u64,
}

impl RunConfig {
    pub fn new(algorithm: AlgorithmConfig, repeats: usize, base_seed: u64) -> Self {
        Self {
            name: algorithm.name().to_string(),
            algorithm,
            repeats,
            base_seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub repeat: usize,
    pub seed: u64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainResult {
    pub domain: String,
    pub runs: Vec<RunResult>,
    pub mean: f64,
    /// Sample standard deviation across repeats (0 for a single repeat).
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmResult {
    pub name: String,
    pub algorithm: AlgorithmConfig,
    pub repeats: usize,
    pub base_seed: u64,
    pub domains: Vec<DomainResult>,
    /// Mean of the per-domain means.
    pub overall_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub format_version: u64,
    pub algorithms: Vec<AlgorithmResult>,
}

/// Mean and sample standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Accuracy of a trained ensemble on every sample of a domain.
pub fn evaluate_on(model: &WeightedEnsemble, domain: &crate::data::DomainDataset) -> Result<f64> {
    let predictions = domain
        .samples()
        .iter()
        .map(|s| model.predict(&s.features))
        .collect::<Result<Vec<_>>>()?;
    accuracy(&predictions, &domain.labels())
}

/// Leave-one-domain-out evaluation of an arbitrary learner.
pub fn evaluate_learner(
    data: &MultiDomainDataset,
    learner: &dyn Learner,
    repeats: usize,
    base_seed: u64,
) -> Result<Vec<DomainResult>> {
    if repeats == 0 {
        return Err(Error::InvalidConfig(
            "run.repeats must be at least 1".into(),
        ));
    }
    let required = learner.min_domains();
    if data.domain_count() < required {
        return Err(Error::TooFewDomains {
            required,
            found: data.domain_count(),
        });
    }
    let names = data.schema().domain_names();
    let jobs: Vec<(usize, usize)> = (0..names.len())
        .flat_map(|t| (0..repeats).map(move |r| (t, r)))
        .collect();
    let results = jobs
        .par_iter()
        .map(|&(t, r)| -> Result<RunResult> {
            let seed = mix(&[base_seed, t as u64, r as u64]);
            let (sources, target) = data.split_source_target(&names[t])?;
            let model = learner.fit(&sources, seed)?;
            Ok(RunResult {
                repeat: r,
                seed,
                accuracy: evaluate_on(&model, &target)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(names
        .iter()
        .zip(results.chunks(repeats))
        .map(|(name, runs)| {
            let accs: Vec<f64> = runs.iter().map(|r| r.accuracy).collect();
            let (mean, std) = mean_std(&accs);
            DomainResult {
                domain: name.clone(),
                runs: runs.to_vec(),
                mean,
                std,
            }
        })
        .collect())
}

fn run_one(data: &MultiDomainDataset, run: &RunConfig) -> Result<AlgorithmResult> {
    run.algorithm.validate()?;
    let domains = evaluate_learner(data, &run.algorithm, run.repeats, run.base_seed)?;
    let means: Vec<f64> = domains.iter().map(|d| d.mean).collect();
    Ok(AlgorithmResult {
        name: run.name.clone(),
        algorithm: run.algorithm.clone(),
        repeats: run.repeats,
        base_seed: run.base_seed,
        overall_mean: mean_std(&means).0,
        domains,
    })
}

pub fn leave_one_domain_out(data: &MultiDomainDataset, run: &RunConfig) -> Result<EvalReport> {
    compare(data, std::slice::from_ref(run))
}

/// Evaluates several runs on the same data and gathers them in one report.
pub fn compare(data: &MultiDomainDataset, runs: &[RunConfig]) -> Result<EvalReport> {
    let algorithms = runs
        .iter()
        .map(|r| run_one(data, r))
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport {
        format_version: REPORT_FORMAT_VERSION,
        algorithms,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    /// Pretty-printed JSON with every run.
    Structured,
    /// CSV with one row per algorithm and domain.
    Tabular,
}

impl EvalReport {
    pub fn to_structured(&self) -> String {
        let mut s =
            serde_json::to_string_pretty(self).expect("reports contain only finite numbers");
        s.push('\n');
        s
    }

    pub fn from_structured(text: &str) -> Result<Self> {
        let report: EvalReport =
            serde_json::from_str(text).map_err(|e| Error::CorruptFile(e.to_string()))?;
        if report.format_version != REPORT_FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                found: report.format_version,
                supported: REPORT_FORMAT_VERSION,
            });
        }
        Ok(report)
    }

    /// `algorithm,domain,mean_accuracy_pct,std_pct,repeats`, percentages
    /// with one decimal.
    pub fn to_tabular(&self) -> String {
        let mut out = String::from("algorithm,domain,mean_accuracy_pct,std_pct,repeats\n");
        for a in &self.algorithms {
            for d in &a.domains {
                out.push_str(&format!(
                    "{},{},{:.1},{:.1},{}\n",
                    a.name,
                    d.domain,
                    100.0 * d.mean,
                    100.0 * d.std,
                    a.repeats
                ));
            }
        }
        out
    }

    pub fn algorithm(&self, name: &str) -> Option<&AlgorithmResult> {
        self.algorithms.iter().find(|a| a.name == name)
    }
}

pub fn emit_report(
    report: &EvalReport,
    format: ReportFormat,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let text = match format {
        ReportFormat::Structured => report.to_structured(),
        ReportFormat::Tabular => report.to_tabular(),
    };
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
