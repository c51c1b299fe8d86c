//! Configuration file and command-line overrides.
//!
//! The config file is TOML with optional sections; every key is optional.
//!
//! ```toml
//! [data]
//! label_col = "label"
//! domain_col = "domain"
//!
//! [run]
//! repeats = 20
//! seed = 1
//! algos = ["baseline_rf", "meta_forests"]
//! baseline_trees = "match"   # or a number
//! threads = 4
//!
//! [meta]
//! iterations = 30
//! alpha = -1.0
//! beta = 0.2
//! meta_sample_ratio = 0.3
//! feature_mask_min_pool = 4
//! standardize_mmd = true
//!
//! [forest]
//! n_trees = 50
//! bootstrap_ratio = 0.2
//! seed_policy = "per_tree"   # or "shared"
//!
//! [tree]
//! max_depth = 5
//! min_samples_split = 2
//! features_per_split = 4
//!
//! [kernel]
//! bandwidth = "median"       # or a number
//! max_points_per_side = 512
//! ```
//!
//! A value given on the command line beats the file, which beats the
//! built-in default.

use std::path::Path;
use std::str::FromStr;

use clap::Args;
use metaforests::eval::{matched_tree_budget, AlgorithmConfig};
use metaforests::forest::{ForestConfig, SeedPolicy};
use metaforests::meta::MetaForestsConfig;
use metaforests::mmd::Bandwidth;
use serde::Deserialize;

use crate::CliError;

pub const ALGORITHMS: [&str; 4] = [
    "baseline_rf",
    "meta_forests",
    "baseline_rf_shared_seed",
    "meta_forests_shared_seed",
];

pub const DEFAULT_REPEATS: usize = 20;
pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub meta: MetaSection,
    #[serde(default)]
    pub forest: ForestSection,
    #[serde(default)]
    pub tree: TreeSection,
    #[serde(default)]
    pub kernel: KernelSection,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub label_col: Option<String>,
    pub domain_col: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub repeats: Option<usize>,
    pub seed: Option<u64>,
    pub algos: Option<Vec<String>>,
    pub baseline_trees: Option<BaselineTrees>,
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetaSection {
    pub iterations: Option<usize>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub meta_sample_ratio: Option<f64>,
    pub feature_mask_min_pool: Option<usize>,
    pub standardize_mmd: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForestSection {
    pub n_trees: Option<usize>,
    pub bootstrap_ratio: Option<f64>,
    pub seed_policy: Option<SeedPolicy>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeSection {
    pub max_depth: Option<usize>,
    pub min_samples_split: Option<usize>,
    pub features_per_split: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    pub bandwidth: Option<Bandwidth>,
    pub max_points_per_side: Option<usize>,
}

/// Trees in the baseline forest.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(try_from = "BaselineTreesRepr")]
pub enum BaselineTrees {
    /// As many trees as meta-forests grows in total.
    #[default]
    Match,
    Count(usize),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum BaselineTreesRepr {
    Count(usize),
    Name(String),
}

impl TryFrom<BaselineTreesRepr> for BaselineTrees {
    type Error = String;

    fn try_from(r: BaselineTreesRepr) -> Result<Self, String> {
        match r {
            BaselineTreesRepr::Count(n) => Ok(BaselineTrees::Count(n)),
            BaselineTreesRepr::Name(s) => s.parse(),
        }
    }
}

impl FromStr for BaselineTrees {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "match" {
            return Ok(BaselineTrees::Match);
        }
        s.parse()
            .map(BaselineTrees::Count)
            .map_err(|_| format!("`{s}` is neither `match` nor a tree count"))
    }
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::usage(format!("config: {}", e.message().trim())))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
            .map_err(|e| CliError::usage(format!("{}: {}", path.display(), e.message)))
    }
}

/// Hyperparameter flags shared by `train` and `lodo`.
#[derive(Debug, Clone, Default, PartialEq, Args)]
pub struct ModelArgs {
    /// Meta-task iterations [default: 10 per source domain]
    #[arg(long)]
    pub iterations: Option<usize>,
    /// MMD coefficient, negative [default: -1]
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    /// Accuracy coefficient, positive [default: 0.2]
    #[arg(long, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    /// Fraction of each domain drawn per meta-task [default: 0.3]
    #[arg(long)]
    pub meta_sample_ratio: Option<f64>,
    /// Smallest feature pool masking may leave [default: ceil(sqrt(d))]
    #[arg(long)]
    pub feature_mask_min_pool: Option<usize>,
    /// Compute MMD on raw rather than standardized features
    #[arg(long)]
    pub raw_mmd: bool,
    /// Trees per meta-forests forest [default: 50]
    #[arg(long)]
    pub n_trees: Option<usize>,
    /// Bootstrap size as a fraction of the training set [default: 0.2]
    #[arg(long)]
    pub bootstrap_ratio: Option<f64>,
    /// Give every tree the same seed (ablation)
    #[arg(long)]
    pub shared_seed: bool,
    /// [default: 5]
    #[arg(long)]
    pub max_depth: Option<usize>,
    /// [default: 2]
    #[arg(long)]
    pub min_samples_split: Option<usize>,
    /// Features tried per split [default: ceil(sqrt(pool))]
    #[arg(long)]
    pub features_per_split: Option<usize>,
    /// RBF bandwidth, `median` or a positive number [default: median]
    #[arg(long)]
    pub bandwidth: Option<Bandwidth>,
    /// Points per side above which MMD subsamples [default: 512]
    #[arg(long)]
    pub kernel_max_points: Option<usize>,
    /// Baseline forest size, `match` or a tree count [default: match]
    #[arg(long)]
    pub baseline_trees: Option<BaselineTrees>,
}

/// Fully resolved settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub meta: MetaForestsConfig,
    pub baseline_trees: BaselineTrees,
}

impl Settings {
    pub fn resolve(file: &FileConfig, args: &ModelArgs) -> Result<Self, CliError> {
        let d = MetaForestsConfig::default();
        let (m, f, t, k) = (&file.meta, &file.forest, &file.tree, &file.kernel);
        let seed_policy = if args.shared_seed {
            SeedPolicy::Shared
        } else {
            f.seed_policy.unwrap_or(d.forest.seed_policy)
        };
        let meta = MetaForestsConfig {
            iterations: args.iterations.or(m.iterations).or(d.iterations),
            alpha: args.alpha.or(m.alpha).unwrap_or(d.alpha),
            beta: args.beta.or(m.beta).unwrap_or(d.beta),
            meta_sample_ratio: args
                .meta_sample_ratio
                .or(m.meta_sample_ratio)
                .unwrap_or(d.meta_sample_ratio),
            feature_mask_min_pool: args
                .feature_mask_min_pool
                .or(m.feature_mask_min_pool)
                .or(d.feature_mask_min_pool),
            standardize_mmd: if args.raw_mmd {
                false
            } else {
                m.standardize_mmd.unwrap_or(d.standardize_mmd)
            },
            forest: ForestConfig {
                n_trees: args.n_trees.or(f.n_trees).unwrap_or(d.forest.n_trees),
                bootstrap_ratio: args
                    .bootstrap_ratio
                    .or(f.bootstrap_ratio)
                    .unwrap_or(d.forest.bootstrap_ratio),
                seed_policy,
                tree: metaforests::tree::TreeParams {
                    max_depth: args
                        .max_depth
                        .or(t.max_depth)
                        .unwrap_or(d.forest.tree.max_depth),
                    min_samples_split: args
                        .min_samples_split
                        .or(t.min_samples_split)
                        .unwrap_or(d.forest.tree.min_samples_split),
                    features_per_split: args
                        .features_per_split
                        .or(t.features_per_split)
                        .or(d.forest.tree.features_per_split),
                },
                master_seed: d.forest.master_seed,
            },
            kernel: metaforests::mmd::KernelConfig {
                bandwidth: args.bandwidth.or(k.bandwidth).unwrap_or(d.kernel.bandwidth),
                max_points_per_side: args
                    .kernel_max_points
                    .or(k.max_points_per_side)
                    .unwrap_or(d.kernel.max_points_per_side),
                seed: d.kernel.seed,
            },
            master_seed: d.master_seed,
        };
        meta.validate()?;
        let baseline_trees = args
            .baseline_trees
            .or(file.run.baseline_trees)
            .unwrap_or_default();
        if baseline_trees == BaselineTrees::Count(0) {
            return Err(CliError::usage("run.baseline_trees must be at least 1"));
        }
        Ok(Self {
            meta,
            baseline_trees,
        })
    }

    /// Forest configuration of the baseline when trained on `source_domains` sources.
    pub fn baseline_forest(&self, source_domains: usize) -> ForestConfig {
        let n_trees = match self.baseline_trees {
            BaselineTrees::Match => matched_tree_budget(&self.meta, source_domains),
            BaselineTrees::Count(n) => n,
        };
        ForestConfig {
            n_trees,
            ..self.meta.forest
        }
    }

    /// The named algorithm, or `None` for an unknown name.
    pub fn algorithm(&self, name: &str, source_domains: usize) -> Option<AlgorithmConfig> {
        let (base, shared) = match name.strip_suffix("_shared_seed") {
            Some(base) => (base, true),
            None => (name, false),
        };
        let mut alg = match base {
            "baseline_rf" => AlgorithmConfig::BaselineRf(self.baseline_forest(source_domains)),
            "meta_forests" => AlgorithmConfig::MetaForests(self.meta.clone()),
            _ => return None,
        };
        if shared {
            match &mut alg {
                AlgorithmConfig::BaselineRf(f) => f.seed_policy = SeedPolicy::Shared,
                AlgorithmConfig::MetaForests(m) => m.forest.seed_policy = SeedPolicy::Shared,
            }
        }
        Some(alg)
    }
}

pub fn unknown_algorithm(name: &str) -> CliError {
    CliError::usage(format!(
        "unknown algorithm `{name}`; valid names: {}",
        ALGORITHMS.join(", ")
    ))
}

/// `--threads`, then `METAFORESTS_THREADS`, then the config file.
pub fn resolve_threads(
    flag: Option<usize>,
    env: Option<&str>,
    file: Option<usize>,
) -> Result<Option<usize>, CliError> {
    let env = match (flag, env) {
        (None, Some(v)) => Some(v.trim().parse::<usize>().map_err(|_| {
            CliError::usage(format!("METAFORESTS_THREADS = `{v}` is not a thread count"))
        })?),
        _ => None,
    };
    let threads = flag.or(env).or(file);
    if threads == Some(0) {
        return Err(CliError::usage("threads must be at least 1"));
    }
    Ok(threads)
}
