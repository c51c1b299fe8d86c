//! The meta-learning loop.
//!
//! Each iteration picks one source domain as meta-test and trains one
//! forest per remaining (meta-train) domain on a fraction of that domain.
//! Every new forest gets a weight derived from the previous weight of its
//! domain, multiplied by `exp(alpha * w_mmd) * exp(beta * w_acc)` where
//! `w_acc` compares the forest's meta-test accuracy with random guessing
//! and `w_mmd` compares the meta-train/meta-test discrepancy with the
//! running mean of all discrepancies seen so far. After every iteration all
//! weights, old and new, are renormalized onto the simplex.
//!
//! Features a forest split on are masked out of the next forest trained on
//! the same domain.

mod ensemble;

use std::collections::{BTreeSet, HashMap};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use ensemble::{
    load_model, read_model, save_model, train_baseline, write_model, EnsembleEntry, ModelKind,
    Provenance, WeightedEnsemble, MODEL_FORMAT_VERSION,
};

use crate::data::{subsample_indices, MultiDomainDataset, Sample};
use crate::eval::accuracy;
use crate::forest::{fit_forest_refs, ForestConfig, SeedPolicy};
use crate::mmd::{mmd, KernelConfig, Standardizer};
use crate::seed::{mix, rng_from_seed};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaForestsConfig {
    /// Meta-task iterations; `None` means ten per source domain.
    pub iterations: Option<usize>,
    pub alpha: f64,
    pub beta: f64,
    pub meta_sample_ratio: f64,
    pub forest: ForestConfig,
    pub kernel: KernelConfig,
    /// Smallest feature pool a domain may be left with by masking;
    /// `None` means `ceil(sqrt(d))`.
    pub feature_mask_min_pool: Option<usize>,
    /// Z-score features with source statistics before computing MMD.
    pub standardize_mmd: bool,
    pub master_seed: u64,
}

impl Default for MetaForestsConfig {
    fn default() -> Self {
        Self {
            iterations: None,
            alpha: -1.0,
            beta: 0.2,
            meta_sample_ratio: 0.3,
            forest: ForestConfig::default(),
            kernel: KernelConfig::default(),
            feature_mask_min_pool: None,
            standardize_mmd: true,
            master_seed: 0,
        }
    }
}

impl MetaForestsConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.iterations == Some(0) {
            return bad("meta.iterations must be at least 1".into());
        }
        if !(self.alpha < 0.0 && self.alpha.is_finite()) {
            return bad(format!("meta.alpha = {} must be negative", self.alpha));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad(format!("meta.beta = {} must be positive", self.beta));
        }
        if !(self.meta_sample_ratio > 0.0 && self.meta_sample_ratio <= 1.0) {
            return bad(format!(
                "meta.meta_sample_ratio = {} must lie in (0, 1]",
                self.meta_sample_ratio
            ));
        }
        if self.feature_mask_min_pool == Some(0) {
            return bad("meta.feature_mask_min_pool must be at least 1".into());
        }
        self.forest.validate()?;
        self.kernel.validate()
    }

    pub fn iterations_for(&self, source_domains: usize) -> usize {
        self.iterations.unwrap_or(10 * source_domains)
    }

    fn min_pool_for(&self, feature_count: usize) -> usize {
        let base = self
            .feature_mask_min_pool
            .unwrap_or_else(|| (feature_count as f64).sqrt().ceil() as usize);
        base.max(self.forest.tree.features_per_split.unwrap_or(1))
            .min(feature_count)
    }
}

/// `e^accuracy - e^(1/C)`: zero at random-guess accuracy.
pub fn compute_w_accuracy(accuracy: f64, class_count: usize) -> f64 {
    accuracy.exp() - (1.0 / class_count as f64).exp()
}

/// `current - mean(history)`, or zero for an empty history.
pub fn compute_w_mmd(current: f64, history: &[f64]) -> f64 {
    if history.is_empty() {
        return 0.0;
    }
    current - history.iter().sum::<f64>() / history.len() as f64
}

/// `prev * exp(alpha * w_mmd) * exp(beta * w_acc)`.
pub fn update_weight(prev: f64, w_mmd: f64, w_acc: f64, alpha: f64, beta: f64) -> Result<f64> {
    if prev.is_nan() || prev <= 0.0 {
        return Err(Error::NonPositiveWeight(prev));
    }
    let w = prev * (alpha * w_mmd).exp() * (beta * w_acc).exp();
    // Extreme exponents can underflow; keep the weight strictly positive.
    Ok(w.max(f64::MIN_POSITIVE))
}

/// Divides every weight by the total.
pub fn normalize_weights(weights: &[f64]) -> Result<Vec<f64>> {
    if weights.is_empty() {
        return Err(Error::EmptyWeights);
    }
    if let Some(&w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
        return Err(Error::NonPositiveWeight(w));
    }
    let total: f64 = weights.iter().sum();
    Ok(weights.iter().map(|w| w / total).collect())
}

/// Picks one domain uniformly as meta-test; the rest form the meta-train set.
pub fn select_meta_split<R: Rng + ?Sized>(
    domains: &[String],
    rng: &mut R,
) -> Result<(Vec<String>, String)> {
    if domains.len() < 2 {
        return Err(Error::TooFewDomains {
            required: 2,
            found: domains.len(),
        });
    }
    let pick = rng.random_range(0..domains.len());
    let train = domains
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != pick)
        .map(|(_, d)| d.clone())
        .collect();
    Ok((train, domains[pick].clone()))
}

/// One forest trained during one meta-task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaTaskRecord {
    pub iteration: usize,
    pub meta_train_domain: String,
    pub meta_test_domain: String,
    pub feature_pool_size: usize,
    pub used_features: Vec<usize>,
    /// The domain's accumulated mask was discarded after this forest.
    pub mask_reset: bool,
    pub accuracy: f64,
    pub mmd: f64,
    pub w_mmd: f64,
    pub w_accuracy: f64,
    pub prev_weight: f64,
    pub updated_weight: f64,
    pub normalized_weight: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetaTaskLog {
    pub records: Vec<MetaTaskRecord>,
}

/// State carried across meta-task iterations.
#[derive(Debug, Clone, Default)]
pub struct MetaState {
    /// One weight per forest trained so far, in training order.
    pub weights: Vec<f64>,
    /// Index into `weights` of the latest forest of each domain.
    pub latest: HashMap<String, usize>,
    pub mmd_history: Vec<f64>,
    pub feature_masks: HashMap<String, BTreeSet<usize>>,
}

impl MetaState {
    /// Weight a new forest of `domain` starts from.
    ///
    /// A domain's latest normalized weight if it has one; otherwise the
    /// initial `1 / (M - 2)` during the first iteration, and the mean weight
    /// of the `existing` forests from earlier iterations afterwards.
    fn prior_weight(&self, domain: &str, meta_train_count: usize, existing: usize) -> f64 {
        match self.latest.get(domain) {
            Some(&i) => self.weights[i],
            None if existing == 0 => 1.0 / meta_train_count as f64,
            None => 1.0 / existing as f64,
        }
    }

    /// Records a new discrepancy and returns its `w_mmd`.
    pub fn observe_mmd(&mut self, current: f64) -> f64 {
        let w = compute_w_mmd(current, &self.mmd_history);
        self.mmd_history.push(current);
        w
    }
}

struct TaskOutcome {
    forest: crate::forest::Forest,
    pool_size: usize,
    accuracy: f64,
    mmd: f64,
}

/// Runs the full meta-learning loop on the source domains.
pub fn run_meta_learning(
    sources: &MultiDomainDataset,
    config: &MetaForestsConfig,
) -> Result<(WeightedEnsemble, MetaTaskLog)> {
    config.validate()?;
    let names: Vec<String> = sources.schema().domain_names().to_vec();
    if names.len() < 2 {
        return Err(Error::TooFewDomains {
            required: 2,
            found: names.len(),
        });
    }
    let class_count = sources.schema().class_count();
    let feature_count = sources.schema().feature_count();
    let all_features: BTreeSet<usize> = (0..feature_count).collect();
    let min_pool = config.min_pool_for(feature_count);
    let iterations = config.iterations_for(names.len());
    let meta_train_count = names.len() - 1;

    let standardizer = if config.standardize_mmd {
        let rows: Vec<&[f64]> = sources
            .pooled()
            .iter()
            .map(|s| s.features.as_slice())
            .collect();
        Some(Standardizer::fit(&rows)?)
    } else {
        None
    };
    let project = |s: &Sample| -> Vec<f64> {
        match &standardizer {
            Some(st) => st.transform(&s.features),
            None => s.features.clone(),
        }
    };

    let mut split_rng = rng_from_seed(mix(&[config.master_seed, 0x5b1]));
    let mut state = MetaState::default();
    let mut entries: Vec<EnsembleEntry> = Vec::new();
    let mut log = MetaTaskLog::default();

    for iteration in 1..=iterations {
        let (train_names, test_name) = select_meta_split(&names, &mut split_rng)?;
        let iter_seed = mix(&[config.master_seed, iteration as u64]);

        let test_domain = sources
            .domain(&test_name)
            .expect("split names come from schema");
        let mut rng = rng_from_seed(mix(&[iter_seed, 0]));
        let test_idx =
            subsample_indices(test_domain.len(), config.meta_sample_ratio, false, &mut rng)?;
        let test_samples: Vec<&Sample> = test_idx
            .iter()
            .map(|&i| &test_domain.samples()[i])
            .collect();
        let test_truth: Vec<usize> = test_samples.iter().map(|s| s.label).collect();
        let test_points: Vec<Vec<f64>> = test_samples.iter().map(|s| project(s)).collect();
        let test_refs: Vec<&[f64]> = test_points.iter().map(Vec::as_slice).collect();

        let outcomes = train_names
            .par_iter()
            .enumerate()
            .map(|(j, name)| -> Result<TaskOutcome> {
                let domain = sources.domain(name).expect("split names come from schema");
                let mut rng = rng_from_seed(mix(&[iter_seed, 1, j as u64]));
                let idx =
                    subsample_indices(domain.len(), config.meta_sample_ratio, false, &mut rng)?;
                let draw: Vec<&Sample> = idx.iter().map(|&i| &domain.samples()[i]).collect();

                let pool: BTreeSet<usize> = match state.feature_masks.get(name) {
                    Some(mask) => all_features.difference(mask).copied().collect(),
                    None => all_features.clone(),
                };
                let mut forest_cfg = config.forest;
                if forest_cfg.seed_policy == SeedPolicy::PerTree {
                    forest_cfg.master_seed = mix(&[iter_seed, 2, j as u64]);
                }
                let forest = fit_forest_refs(&draw, class_count, &pool, &forest_cfg)?;

                let predictions = test_samples
                    .iter()
                    .map(|s| forest.predict(&s.features))
                    .collect::<Result<Vec<_>>>()?;
                let acc = accuracy(&predictions, &test_truth)?;

                let train_points: Vec<Vec<f64>> = draw.iter().map(|s| project(s)).collect();
                let train_refs: Vec<&[f64]> = train_points.iter().map(Vec::as_slice).collect();
                let kernel = KernelConfig {
                    seed: mix(&[iter_seed, 3, j as u64]),
                    ..config.kernel
                };
                let est = mmd(&train_refs, &test_refs, &kernel)?;
                Ok(TaskOutcome {
                    forest,
                    pool_size: pool.len(),
                    accuracy: acc,
                    mmd: est.mmd,
                })
            })
            .collect::<Result<Vec<_>>>()?;

        let first_record = log.records.len();
        let existing = state.weights.len();
        let mut new_latest = Vec::with_capacity(outcomes.len());
        for (name, outcome) in train_names.iter().zip(outcomes) {
            let w_mmd = state.observe_mmd(outcome.mmd);
            let w_accuracy = compute_w_accuracy(outcome.accuracy, class_count);
            let prev_weight = state.prior_weight(name, meta_train_count, existing);
            let updated = update_weight(prev_weight, w_mmd, w_accuracy, config.alpha, config.beta)?;

            let used = outcome.forest.used_features().clone();
            let mask = state.feature_masks.entry(name.clone()).or_default();
            mask.extend(used.iter().copied());
            let mask_reset = feature_count - mask.len() < min_pool;
            if mask_reset {
                // Restart from this forest's features alone when that still
                // leaves a large enough pool.
                *mask = if feature_count - used.len() >= min_pool {
                    used.clone()
                } else {
                    BTreeSet::new()
                };
            }

            log.records.push(MetaTaskRecord {
                iteration,
                meta_train_domain: name.clone(),
                meta_test_domain: test_name.clone(),
                feature_pool_size: outcome.pool_size,
                used_features: used.into_iter().collect(),
                mask_reset,
                accuracy: outcome.accuracy,
                mmd: outcome.mmd,
                w_mmd,
                w_accuracy,
                prev_weight,
                updated_weight: updated,
                normalized_weight: f64::NAN,
            });
            new_latest.push((name.clone(), entries.len()));
            state.weights.push(updated);
            entries.push(EnsembleEntry {
                forest: outcome.forest,
                weight: updated,
                provenance: Provenance::MetaTask {
                    iteration,
                    meta_train_domain: name.clone(),
                    meta_test_domain: test_name.clone(),
                },
            });
        }

        state.weights = normalize_weights(&state.weights)?;
        for (entry, &w) in entries.iter_mut().zip(&state.weights) {
            entry.weight = w;
        }
        for (offset, record) in log.records[first_record..].iter_mut().enumerate() {
            record.normalized_weight = state.weights[first_record + offset];
        }
        state.latest.extend(new_latest);
    }

    let ensemble = WeightedEnsemble::new(
        sources.schema().clone(),
        ModelKind::MetaForests(config.clone()),
        entries,
        Some(log.clone()),
    )?;
    Ok((ensemble, log))
}
