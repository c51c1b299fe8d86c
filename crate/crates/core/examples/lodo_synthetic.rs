//! Baseline forest vs meta-forests on the synthetic shift benchmark.
//!
//! `cargo run --release -p metaforests --example lodo_synthetic -- [repeats] [data_seed]`

use metaforests::data::{generate_synthetic, SyntheticSpec};
use metaforests::eval::{compare, matched_tree_budget, AlgorithmConfig, RunConfig};
use metaforests::forest::{ForestConfig, SeedPolicy};
use metaforests::meta::MetaForestsConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let repeats: usize = args.next().map(|a| a.parse()).transpose()?.unwrap_or(20);
    let data_seed: u64 = args.next().map(|a| a.parse()).transpose()?.unwrap_or(7);

    let data = generate_synthetic(&SyntheticSpec {
        seed: data_seed,
        ..Default::default()
    })?;
    let meta = MetaForestsConfig::default();
    // Same total number of trees as meta-forests grows.
    let baseline = ForestConfig {
        n_trees: matched_tree_budget(&meta, data.domain_count() - 1),
        ..meta.forest
    };
    let shared = MetaForestsConfig {
        forest: ForestConfig {
            seed_policy: SeedPolicy::Shared,
            ..meta.forest
        },
        ..meta.clone()
    };
    let mut runs = vec![
        RunConfig::new(AlgorithmConfig::BaselineRf(baseline), repeats, 1),
        RunConfig::new(AlgorithmConfig::MetaForests(meta), repeats, 1),
        RunConfig::new(AlgorithmConfig::MetaForests(shared), repeats, 1),
    ];
    runs[2].name = "meta_forests_shared_seed".into();

    let start = std::time::Instant::now();
    let report = compare(&data, &runs)?;
    print!("{}", report.to_tabular());
    for a in &report.algorithms {
        println!("{:<28} overall {:.2}%", a.name, 100.0 * a.overall_mean);
    }
    println!("elapsed {:.1?}", start.elapsed());
    Ok(())
}
