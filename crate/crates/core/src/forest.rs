//! Bagged forests of CART trees.
//!
//! Tree `t` of a forest with master seed `m` is grown with seed
//! `mix(m, t)` on a with-replacement bootstrap drawn with seed
//! `mix(m, t, 1)`. Trees are fitted in parallel and collected in index
//! order, so the fitted forest does not depend on the thread count.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{subsample_indices, Sample};
use crate::seed::{mix, rng_from_seed};
use crate::tree::{fit_tree_refs, DecisionTree, TreeConfig, TreeParams};
use crate::{Error, Result};

/// How per-tree seeds are derived from the forest's master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedPolicy {
    /// Every tree gets its own seed (the normal mode).
    #[default]
    PerTree,
    /// Every tree reuses the seeds of tree 0. Exists for ablations.
    Shared,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub tree: TreeParams,
    pub bootstrap_ratio: f64,
    pub master_seed: u64,
    #[serde(default)]
    pub seed_policy: SeedPolicy,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 50,
            tree: TreeParams::default(),
            bootstrap_ratio: 0.2,
            master_seed: 0,
            seed_policy: SeedPolicy::PerTree,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::InvalidConfig(
                "forest.n_trees must be at least 1".into(),
            ));
        }
        if !(self.bootstrap_ratio > 0.0 && self.bootstrap_ratio <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "forest.bootstrap_ratio = {} must lie in (0, 1]",
                self.bootstrap_ratio
            )));
        }
        self.tree.validate()
    }

    /// `(tree seed, bootstrap seed)` for tree `t`.
    pub fn tree_seeds(&self, t: usize) -> (u64, u64) {
        let t = match self.seed_policy {
            SeedPolicy::PerTree => t as u64,
            SeedPolicy::Shared => 0,
        };
        (mix(&[self.master_seed, t]), mix(&[self.master_seed, t, 1]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    trees: Vec<DecisionTree>,
    used_features: BTreeSet<usize>,
    feature_pool: BTreeSet<usize>,
    feature_count: usize,
    class_count: usize,
    config: ForestConfig,
}

pub fn fit_forest(
    samples: &[Sample],
    class_count: usize,
    feature_pool: &BTreeSet<usize>,
    config: &ForestConfig,
) -> Result<Forest> {
    let refs: Vec<&Sample> = samples.iter().collect();
    fit_forest_refs(&refs, class_count, feature_pool, config)
}

pub(crate) fn fit_forest_refs(
    samples: &[&Sample],
    class_count: usize,
    feature_pool: &BTreeSet<usize>,
    config: &ForestConfig,
) -> Result<Forest> {
    config.validate()?;
    let Some(first) = samples.first() else {
        return Err(Error::EmptyInput);
    };
    if feature_pool.is_empty() {
        return Err(Error::EmptyFeaturePool);
    }
    let trees = (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            let (tree_seed, boot_seed) = config.tree_seeds(t);
            let mut rng = rng_from_seed(boot_seed);
            let idx = subsample_indices(samples.len(), config.bootstrap_ratio, true, &mut rng)?;
            let bag: Vec<&Sample> = idx.iter().map(|&i| samples[i]).collect();
            fit_tree_refs(
                &bag,
                class_count,
                feature_pool,
                &TreeConfig {
                    params: config.tree,
                    seed: tree_seed,
                },
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let used_features = trees
        .iter()
        .flat_map(|t| t.used_features().iter().copied())
        .collect();
    Ok(Forest {
        trees,
        used_features,
        feature_pool: feature_pool.clone(),
        feature_count: first.features.len(),
        class_count,
        config: *config,
    })
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

impl Forest {
    /// Assembles a forest from already fitted trees.
    pub fn from_trees(
        trees: Vec<DecisionTree>,
        feature_pool: BTreeSet<usize>,
        config: ForestConfig,
    ) -> Result<Self> {
        let Some(first) = trees.first() else {
            return Err(Error::EmptyInput);
        };
        let (feature_count, class_count) = (first.feature_count(), first.class_count());
        if trees
            .iter()
            .any(|t| t.feature_count() != feature_count || t.class_count() != class_count)
        {
            return Err(Error::InvalidSchema("trees disagree on dimensions".into()));
        }
        let used_features = trees
            .iter()
            .flat_map(|t| t.used_features().iter().copied())
            .collect();
        Ok(Self {
            trees,
            used_features,
            feature_pool,
            feature_count,
            class_count,
            config,
        })
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    pub fn used_features(&self) -> &BTreeSet<usize> {
        &self.used_features
    }

    pub fn feature_pool(&self) -> &BTreeSet<usize> {
        &self.feature_pool
    }

    pub fn feature_count(&self) -> usize {
        self.feature_count
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn config(&self) -> &ForestConfig {
        &self.config
    }

    /// Mean of the per-tree leaf distributions.
    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.class_count];
        self.accumulate_proba(x, 1.0, &mut out)?;
        Ok(out)
    }

    pub(crate) fn accumulate_proba(&self, x: &[f64], scale: f64, out: &mut [f64]) -> Result<()> {
        if x.len() != self.feature_count {
            return Err(Error::DimensionMismatch {
                expected: self.feature_count,
                found: x.len(),
            });
        }
        let mut acc = vec![0.0; self.class_count];
        for tree in &self.trees {
            tree.accumulate_proba(x, 1.0, &mut acc)?;
        }
        let n = self.trees.len() as f64;
        for (o, a) in out.iter_mut().zip(acc) {
            *o += scale * (a / n);
        }
        Ok(())
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.predict_proba(x)?))
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.trees.is_empty() {
            return Err(Error::CorruptFile("forest without trees".into()));
        }
        for t in &self.trees {
            if t.feature_count() != self.feature_count || t.class_count() != self.class_count {
                return Err(Error::CorruptFile(
                    "tree dimensions disagree with forest".into(),
                ));
            }
            t.validate()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::fit_tree;

    fn toy() -> Vec<Sample> {
        vec![
            Sample::new(vec![0.0, 0.0], 0),
            Sample::new(vec![0.0, 1.0], 1),
            Sample::new(vec![1.0, 0.0], 1),
            Sample::new(vec![1.0, 1.0], 0),
        ]
    }

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax(&[0.5, 0.5]), 0);
        assert_eq!(argmax(&[0.2, 0.4, 0.4]), 1);
        assert_eq!(argmax(&[2.0 / 3.0, 1.0 / 3.0]), 0);
    }

    #[test]
    fn one_tree_forest_is_a_bootstrapped_tree() {
        let data = toy();
        let pool: BTreeSet<usize> = [0, 1].into();
        let cfg = ForestConfig {
            n_trees: 1,
            bootstrap_ratio: 1.0,
            master_seed: 11,
            ..Default::default()
        };
        let forest = fit_forest(&data, 2, &pool, &cfg).unwrap();
        let (tree_seed, boot_seed) = cfg.tree_seeds(0);
        let mut rng = rng_from_seed(boot_seed);
        let idx = subsample_indices(data.len(), 1.0, true, &mut rng).unwrap();
        let bag: Vec<Sample> = idx.iter().map(|&i| data[i].clone()).collect();
        let tree = fit_tree(
            &bag,
            2,
            &pool,
            &TreeConfig {
                params: cfg.tree,
                seed: tree_seed,
            },
        )
        .unwrap();
        assert_eq!(forest.trees(), std::slice::from_ref(&tree));
        for s in &data {
            assert_eq!(
                forest.predict_proba(&s.features).unwrap(),
                tree.predict_proba(&s.features).unwrap()
            );
        }
    }

    #[test]
    fn shared_policy_repeats_tree_zero() {
        let cfg = ForestConfig {
            seed_policy: SeedPolicy::Shared,
            ..Default::default()
        };
        assert_eq!(cfg.tree_seeds(0), cfg.tree_seeds(17));
        let per_tree = ForestConfig::default();
        assert_ne!(per_tree.tree_seeds(0), per_tree.tree_seeds(1));
    }

    #[test]
    fn config_validation() {
        let bad = [
            ForestConfig {
                n_trees: 0,
                ..Default::default()
            },
            ForestConfig {
                bootstrap_ratio: 0.0,
                ..Default::default()
            },
            ForestConfig {
                bootstrap_ratio: 1.01,
                ..Default::default()
            },
            ForestConfig {
                tree: TreeParams {
                    max_depth: 0,
                    ..Default::default()
                },
                ..Default::default()
            },
            ForestConfig {
                tree: TreeParams {
                    min_samples_split: 1,
                    ..Default::default()
                },
                ..Default::default()
            },
        ];
        for cfg in bad {
            assert!(
                matches!(cfg.validate(), Err(Error::InvalidConfig(_))),
                "{cfg:?}"
            );
        }
    }

    #[test]
    fn dimension_mismatch() {
        let forest = fit_forest(&toy(), 2, &[0, 1].into(), &ForestConfig::default()).unwrap();
        assert!(matches!(
            forest.predict(&[0.0]),
            Err(Error::DimensionMismatch {
                expected: 2,
                found: 1
            })
        ));
    }
}
