//! CART classification trees.
//!
//! Splits maximize the weighted Gini decrease over a random subset of the
//! feature pool. Thresholds sit at midpoints between consecutive distinct
//! values; ties are resolved toward the lower feature index and then the
//! lower threshold. A sample goes left when `x[feature] <= threshold`.

use std::collections::BTreeSet;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Sample;
use crate::seed::rng_from_seed;
use crate::{Error, Result};

/// Splits whose impurity decrease does not exceed this are treated as no split.
pub const MIN_IMPURITY_DECREASE: f64 = 1e-12;

/// Growth limits shared by every tree of a forest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_split: usize,
    /// Features drawn per split; `None` means `ceil(sqrt(pool size))`.
    pub features_per_split: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: 5,
            min_samples_split: 2,
            features_per_split: None,
        }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_depth < 1 {
            return Err(Error::InvalidConfig(
                "tree.max_depth must be at least 1".into(),
            ));
        }
        if self.min_samples_split < 2 {
            return Err(Error::InvalidConfig(
                "tree.min_samples_split must be at least 2".into(),
            ));
        }
        if self.features_per_split == Some(0) {
            return Err(Error::InvalidConfig(
                "tree.features_per_split must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Number of features examined per split for a pool of `pool` features.
    pub fn features_for_pool(&self, pool: usize) -> Result<usize> {
        if pool == 0 {
            return Err(Error::EmptyFeaturePool);
        }
        match self.features_per_split {
            None => Ok((pool as f64).sqrt().ceil() as usize),
            Some(0) => Err(Error::InvalidConfig(
                "tree.features_per_split must be at least 1".into(),
            )),
            Some(k) if k > pool => Err(Error::FeaturesPerSplitExceedsPool { requested: k, pool }),
            Some(k) => Ok(k),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub params: TreeParams,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitChoice {
    pub feature: usize,
    pub threshold: f64,
    pub impurity_decrease: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        impurity_decrease: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        counts: Vec<u32>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    nodes: Vec<Node>,
    depth: usize,
    used_features: BTreeSet<usize>,
    feature_count: usize,
    class_count: usize,
}

/// `1 - sum p_c^2` over the class histogram.
pub fn gini_impurity(counts: &[usize]) -> Result<f64> {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(Error::EmptyHistogram);
    }
    Ok(gini_of(counts, total))
}

fn gini_of(counts: &[usize], total: usize) -> f64 {
    let t = total as f64;
    1.0 - counts
        .iter()
        .map(|&c| {
            let p = c as f64 / t;
            p * p
        })
        .sum::<f64>()
}

fn histogram(samples: &[&Sample], class_count: usize) -> Vec<usize> {
    let mut counts = vec![0usize; class_count];
    for s in samples {
        counts[s.label] += 1;
    }
    counts
}

/// Best split over `features_per_split` features drawn from `feature_pool`.
///
/// Returns `Ok(None)` when there are fewer than `min_samples_split` samples
/// or no candidate threshold decreases impurity.
pub fn best_split<R: Rng + ?Sized>(
    samples: &[&Sample],
    class_count: usize,
    feature_pool: &BTreeSet<usize>,
    params: &TreeParams,
    rng: &mut R,
) -> Result<Option<SplitChoice>> {
    let mtry = params.features_for_pool(feature_pool.len())?;
    if samples.len() < params.min_samples_split.max(2) {
        return Ok(None);
    }
    let pool: Vec<usize> = feature_pool.iter().copied().collect();
    let mut chosen: Vec<usize> = index::sample(rng, pool.len(), mtry)
        .into_iter()
        .map(|i| pool[i])
        .collect();
    chosen.sort_unstable();

    let total = histogram(samples, class_count);
    let n = samples.len();
    let parent = gini_of(&total, n);
    let nf = n as f64;

    let mut best: Option<SplitChoice> = None;
    let mut column: Vec<(f64, usize)> = Vec::with_capacity(n);
    let mut left = vec![0usize; class_count];
    let mut right = vec![0usize; class_count];
    for &feature in &chosen {
        column.clear();
        column.extend(samples.iter().map(|s| (s.features[feature], s.label)));
        column.sort_by(|a, b| a.0.total_cmp(&b.0));
        left.iter_mut().for_each(|c| *c = 0);
        right.copy_from_slice(&total);
        for i in 0..n - 1 {
            let (value, label) = column[i];
            left[label] += 1;
            right[label] -= 1;
            let next = column[i + 1].0;
            if value >= next {
                continue;
            }
            let mut threshold = (value + next) / 2.0;
            if threshold >= next {
                threshold = value;
            }
            let (nl, nr) = (i + 1, n - i - 1);
            let decrease = parent
                - (nl as f64 / nf) * gini_of(&left, nl)
                - (nr as f64 / nf) * gini_of(&right, nr);
            if best.is_none_or(|b| decrease > b.impurity_decrease) {
                best = Some(SplitChoice {
                    feature,
                    threshold,
                    impurity_decrease: decrease,
                });
            }
        }
    }
    Ok(best.filter(|b| b.impurity_decrease > MIN_IMPURITY_DECREASE))
}

/// Grows a tree on `samples` using only features in `feature_pool`.
pub fn fit_tree(
    samples: &[Sample],
    class_count: usize,
    feature_pool: &BTreeSet<usize>,
    config: &TreeConfig,
) -> Result<DecisionTree> {
    let refs: Vec<&Sample> = samples.iter().collect();
    fit_tree_refs(&refs, class_count, feature_pool, config)
}

pub(crate) fn fit_tree_refs(
    samples: &[&Sample],
    class_count: usize,
    feature_pool: &BTreeSet<usize>,
    config: &TreeConfig,
) -> Result<DecisionTree> {
    config.params.validate()?;
    let Some(first) = samples.first() else {
        return Err(Error::EmptyInput);
    };
    if feature_pool.is_empty() {
        return Err(Error::EmptyFeaturePool);
    }
    if class_count < 2 {
        return Err(Error::InvalidConfig(
            "class_count must be at least 2".into(),
        ));
    }
    let feature_count = first.features.len();
    if let Some(&f) = feature_pool.iter().next_back() {
        if f >= feature_count {
            return Err(Error::InvalidConfig(format!(
                "feature pool index {f} out of range for {feature_count} features"
            )));
        }
    }
    config.params.features_for_pool(feature_pool.len())?;

    let mut builder = Builder {
        class_count,
        pool: feature_pool,
        params: &config.params,
        rng: rng_from_seed(config.seed),
        nodes: Vec::new(),
        used: BTreeSet::new(),
        depth: 0,
    };
    builder.grow(samples.to_vec(), 0)?;
    Ok(DecisionTree {
        nodes: builder.nodes,
        depth: builder.depth,
        used_features: builder.used,
        feature_count,
        class_count,
    })
}

struct Builder<'a> {
    class_count: usize,
    pool: &'a BTreeSet<usize>,
    params: &'a TreeParams,
    rng: rand_chacha::ChaCha8Rng,
    nodes: Vec<Node>,
    used: BTreeSet<usize>,
    depth: usize,
}

impl Builder<'_> {
    fn grow(&mut self, samples: Vec<&Sample>, depth: usize) -> Result<usize> {
        let id = self.nodes.len();
        self.depth = self.depth.max(depth);
        let counts = histogram(&samples, self.class_count);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let split = if pure || depth >= self.params.max_depth {
            None
        } else {
            best_split(
                &samples,
                self.class_count,
                self.pool,
                self.params,
                &mut self.rng,
            )?
        };
        let Some(split) = split else {
            self.nodes.push(Node::Leaf {
                counts: counts.into_iter().map(|c| c as u32).collect(),
            });
            return Ok(id);
        };

        self.nodes.push(Node::Leaf { counts: Vec::new() });
        self.used.insert(split.feature);
        let (l, r): (Vec<&Sample>, Vec<&Sample>) = samples
            .into_iter()
            .partition(|s| s.features[split.feature] <= split.threshold);
        let left = self.grow(l, depth + 1)?;
        let right = self.grow(r, depth + 1)?;
        self.nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            impurity_decrease: split.impurity_decrease,
            left,
            right,
        };
        Ok(id)
    }
}

impl DecisionTree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Length of the longest root-to-leaf path; a single leaf has depth 0.
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn used_features(&self) -> &BTreeSet<usize> {
        &self.used_features
    }

    pub fn feature_count(&self) -> usize {
        self.feature_count
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    fn leaf_for(&self, x: &[f64]) -> &[u32] {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                Node::Leaf { counts } => return counts,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    id = if x[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
            }
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.feature_count {
            return Err(Error::DimensionMismatch {
                expected: self.feature_count,
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Leaf class distribution for `x`.
    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.class_count];
        self.accumulate_proba(x, 1.0, &mut out)?;
        Ok(out)
    }

    /// Adds `scale * predict_proba(x)` to `out`.
    pub(crate) fn accumulate_proba(&self, x: &[f64], scale: f64, out: &mut [f64]) -> Result<()> {
        self.check_dim(x)?;
        let counts = self.leaf_for(x);
        let total: u32 = counts.iter().sum();
        let t = total as f64;
        for (o, &c) in out.iter_mut().zip(counts) {
            *o += scale * (c as f64 / t);
        }
        Ok(())
    }

    /// Sum of all leaf histograms.
    pub fn leaf_mass(&self) -> u64 {
        self.nodes
            .iter()
            .map(|n| match n {
                Node::Leaf { counts } => counts.iter().map(|&c| c as u64).sum(),
                Node::Split { .. } => 0,
            })
            .sum()
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::CorruptFile(format!("tree: {m}")));
        if self.nodes.is_empty() {
            return bad("no nodes");
        }
        for (i, n) in self.nodes.iter().enumerate() {
            match n {
                Node::Leaf { counts } => {
                    if counts.len() != self.class_count || counts.iter().all(|&c| c == 0) {
                        return bad("malformed leaf histogram");
                    }
                }
                Node::Split {
                    feature,
                    left,
                    right,
                    threshold,
                    ..
                } => {
                    if *feature >= self.feature_count
                        || *left <= i
                        || *right <= i
                        || *left >= self.nodes.len()
                        || *right >= self.nodes.len()
                        || !threshold.is_finite()
                    {
                        return bad("malformed split node");
                    }
                }
            }
        }
        Ok(())
    }
}
