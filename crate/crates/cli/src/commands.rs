//! Subcommand implementations.

use std::io::Write;
use std::path::Path;

use metaforests::data::{
    generate_synthetic, load_csv, write_csv, MultiDomainDataset, SyntheticSpec,
};
use metaforests::eval::{compare, emit_report, Learner, ReportFormat, RunConfig};
use metaforests::meta::{load_model, save_model, Provenance, WeightedEnsemble};
use metaforests::Error;
use serde::Serialize;

use crate::config::{self, FileConfig, Settings};
use crate::{CliError, EvalArgs, InspectArgs, LodoArgs, SortKey, SynthArgs, TrainArgs};

/// Column names used to read and write CSV files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Columns {
    pub label: String,
    pub domain: String,
}

fn print(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes()).map_err(|e| CliError {
        code: crate::EXIT_DATA,
        message: format!("cannot write output: {e}"),
    })
}

fn load_data(path: &Path, columns: &Columns) -> Result<MultiDomainDataset, CliError> {
    Ok(load_csv(path, &columns.label, &columns.domain)?)
}

pub fn cmd_synth(args: &SynthArgs, columns: &Columns, out: &mut dyn Write) -> Result<(), CliError> {
    let spec = SyntheticSpec {
        domain_count: args.domains,
        class_count: args.classes,
        feature_dim: args.dim,
        samples_per_domain: args.per_domain,
        shift_magnitude: args.shift,
        noise_scale: args.noise,
        seed: args.seed,
    };
    let data = generate_synthetic(&spec)?;
    write_csv(&data, &args.out, &columns.label, &columns.domain)?;
    print(
        out,
        &format!(
            "wrote {} rows ({} domains, {} classes, {} features) to {}\n",
            data.sample_count(),
            data.domain_count(),
            data.schema().class_count(),
            data.schema().feature_count(),
            args.out.display()
        ),
    )
}

pub fn cmd_train(
    args: &TrainArgs,
    file: &FileConfig,
    columns: &Columns,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let settings = Settings::resolve(file, &args.model)?;
    let data = load_data(&args.data, columns)?;
    let (sources, _) = data.split_source_target(&args.target)?;
    let algorithm = settings
        .algorithm(&args.algo, sources.domain_count())
        .ok_or_else(|| config::unknown_algorithm(&args.algo))?;
    if data.domain_count() < algorithm.min_domains() {
        return Err(Error::TooFewDomains {
            required: algorithm.min_domains(),
            found: data.domain_count(),
        }
        .into());
    }
    let seed = args.seed.or(file.run.seed).unwrap_or(config::DEFAULT_SEED);
    let model = algorithm.fit(&sources, seed)?;
    if let Some(log) = model.log() {
        for r in &log.records {
            eprintln!(
                "iteration {:>3}  train {:<10} test {:<10} acc {:.4}  mmd {:.4}  weight {:.6}",
                r.iteration,
                r.meta_train_domain,
                r.meta_test_domain,
                r.accuracy,
                r.mmd,
                r.normalized_weight
            );
        }
    }
    save_model(&model, &args.out)?;
    print(
        out,
        &format!(
            "{}: {} forests, {} trees, weight entropy {:.4} nats; sources {}; saved to {}\n",
            model.kind().name(),
            model.entries().len(),
            model.tree_count(),
            model.weight_entropy(),
            model.source_domains().join(","),
            args.out.display()
        ),
    )
}

#[derive(Debug, Serialize)]
struct ClassCounts {
    label: String,
    support: usize,
    predicted: usize,
    correct: usize,
}

#[derive(Debug, Serialize)]
struct EvalOutput {
    domain: String,
    training_source: bool,
    samples: usize,
    correct: usize,
    accuracy: f64,
    classes: Vec<ClassCounts>,
}

fn check_compatible(model: &WeightedEnsemble, data: &MultiDomainDataset) -> Result<(), CliError> {
    let (m, d) = (model.schema(), data.schema());
    if m.feature_count() != d.feature_count() {
        return Err(Error::DimensionMismatch {
            expected: m.feature_count(),
            found: d.feature_count(),
        }
        .into());
    }
    if m.class_labels() != d.class_labels() {
        return Err(Error::InvalidSchema(format!(
            "model classes [{}] differ from data classes [{}]",
            m.class_labels().join(","),
            d.class_labels().join(",")
        ))
        .into());
    }
    Ok(())
}

pub fn cmd_eval(args: &EvalArgs, columns: &Columns, out: &mut dyn Write) -> Result<(), CliError> {
    let model = load_model(&args.model).map_err(CliError::model)?;
    let data = load_data(&args.data, columns)?;
    check_compatible(&model, &data)?;
    let domain = data
        .domain(&args.domain)
        .ok_or_else(|| Error::UnknownDomain(args.domain.clone()))?;
    let training_source = model.source_domains().iter().any(|d| d == &args.domain);
    if training_source {
        eprintln!(
            "warning: domain `{}` was a training source of this model; the accuracy is not a held-out estimate",
            args.domain
        );
    }

    let labels = data.schema().class_labels();
    let mut classes: Vec<ClassCounts> = labels
        .iter()
        .map(|l| ClassCounts {
            label: l.clone(),
            support: 0,
            predicted: 0,
            correct: 0,
        })
        .collect();
    for s in domain.samples() {
        let p = model.predict(&s.features)?;
        classes[s.label].support += 1;
        classes[p].predicted += 1;
        if p == s.label {
            classes[p].correct += 1;
        }
    }
    let correct: usize = classes.iter().map(|c| c.correct).sum();
    let result = EvalOutput {
        domain: args.domain.clone(),
        training_source,
        samples: domain.len(),
        correct,
        accuracy: correct as f64 / domain.len() as f64,
        classes,
    };

    let mut text = format!(
        "domain {}: accuracy {:.4} ({}/{})\nclass,support,predicted,correct\n",
        result.domain, result.accuracy, result.correct, result.samples
    );
    for c in &result.classes {
        text.push_str(&format!(
            "{},{},{},{}\n",
            c.label, c.support, c.predicted, c.correct
        ));
    }
    print(out, &text)?;
    if let Some(path) = &args.report {
        let mut json = serde_json::to_string_pretty(&result).expect("finite metrics");
        json.push('\n');
        std::fs::write(path, json).map_err(|e| {
            CliError::from(Error::Io {
                path: path.clone(),
                source: e,
            })
        })?;
    }
    Ok(())
}

pub fn cmd_lodo(
    args: &LodoArgs,
    file: &FileConfig,
    columns: &Columns,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let settings = Settings::resolve(file, &args.model)?;
    let names = args
        .algos
        .clone()
        .or_else(|| file.run.algos.clone())
        .unwrap_or_else(|| vec!["baseline_rf".into(), "meta_forests".into()]);
    if names.is_empty() {
        return Err(CliError::usage("no algorithms given"));
    }
    let repeats = args
        .repeats
        .or(file.run.repeats)
        .unwrap_or(config::DEFAULT_REPEATS);
    let seed = args.seed.or(file.run.seed).unwrap_or(config::DEFAULT_SEED);
    if repeats == 0 {
        return Err(CliError::usage("run.repeats must be at least 1"));
    }
    // Resolve every name before touching the data so typos fail fast.
    for name in &names {
        settings
            .algorithm(name, 1)
            .ok_or_else(|| config::unknown_algorithm(name))?;
    }

    let data = load_data(&args.data, columns)?;
    let sources = data.domain_count().saturating_sub(1);
    let runs: Vec<RunConfig> = names
        .iter()
        .map(|name| {
            let alg = settings.algorithm(name, sources).expect("checked above");
            let mut run = RunConfig::new(alg, repeats, seed);
            run.name = name.clone();
            run
        })
        .collect();
    let report = compare(&data, &runs)?;
    emit_report(&report, ReportFormat::Structured, &args.json)?;
    emit_report(&report, ReportFormat::Tabular, &args.csv)?;

    let mut text = report.to_tabular();
    for a in &report.algorithms {
        text.push_str(&format!(
            "# {} overall {:.1}%\n",
            a.name,
            100.0 * a.overall_mean
        ));
    }
    print(out, &text)
}

pub fn cmd_inspect(args: &InspectArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let model = load_model(&args.model).map_err(CliError::model)?;
    let schema = model.schema();
    let mut text = format!(
        "algorithm {}\nfeatures {}  classes {}  sources {}\nforests {}  trees {}  weight entropy {:.4} nats\n\n",
        model.kind().name(),
        schema.feature_count(),
        schema.class_labels().join(","),
        model.source_domains().join(","),
        model.entries().len(),
        model.tree_count(),
        model.weight_entropy()
    );

    let mut order: Vec<usize> = (0..model.entries().len()).collect();
    if args.sort == SortKey::Weight {
        let entries = model.entries();
        order.sort_by(|&a, &b| {
            entries[b]
                .weight
                .total_cmp(&entries[a].weight)
                .then(a.cmp(&b))
        });
    }
    text.push_str(&format!(
        "{:>6} {:>9} {:<12} {:<12} {:>10} {:>6}\n",
        "forest", "iteration", "meta_train", "meta_test", "weight", "trees"
    ));
    for i in order {
        let e = &model.entries()[i];
        let (iteration, train, test) = match &e.provenance {
            Provenance::Baseline { .. } => ("-".to_string(), "pooled".to_string(), "-".to_string()),
            Provenance::MetaTask {
                iteration,
                meta_train_domain,
                meta_test_domain,
            } => (
                iteration.to_string(),
                meta_train_domain.clone(),
                meta_test_domain.clone(),
            ),
        };
        text.push_str(&format!(
            "{:>6} {:>9} {:<12} {:<12} {:>10.6} {:>6}\n",
            i,
            iteration,
            train,
            test,
            e.weight,
            e.forest.trees().len()
        ));
    }
    let total: f64 = model.weights().iter().sum();
    text.push_str(&format!("weight sum {total:.6}\n"));

    if let Some(log) = model.log() {
        text.push_str(&format!(
            "\nmeta-task log\n{:>9} {:<12} {:<12} {:>5} {:>5} {:>8} {:>8} {:>9} {:>9} {:>10} {:>10}\n",
            "iteration", "meta_train", "meta_test", "pool", "reset", "accuracy", "mmd", "w_mmd", "w_acc", "prev", "updated"
        ));
        for r in &log.records {
            text.push_str(&format!(
                "{:>9} {:<12} {:<12} {:>5} {:>5} {:>8.4} {:>8.4} {:>9.4} {:>9.4} {:>10.6} {:>10.6}\n",
                r.iteration,
                r.meta_train_domain,
                r.meta_test_domain,
                r.feature_pool_size,
                if r.mask_reset { "yes" } else { "no" },
                r.accuracy,
                r.mmd,
                r.w_mmd,
                r.w_accuracy,
                r.prev_weight,
                r.updated_weight
            ));
        }
    }
    print(out, &text)
}
