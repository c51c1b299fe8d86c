//! The `metaforests` command-line tool.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 data error,
//! 4 model error.

pub mod commands;
pub mod config;

use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use config::ModelArgs;

#[derive(Debug, Parser)]
#[command(
    name = "metaforests",
    version,
    about = "Meta-forests domain generalization"
)]
pub struct Cli {
    /// TOML config file
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads [env: METAFORESTS_THREADS]
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Name of the label column [default: label]
    #[arg(long, global = true)]
    pub label_col: Option<String>,
    /// Name of the domain column [default: domain]
    #[arg(long, global = true)]
    pub domain_col: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic multi-domain dataset
    Synth(SynthArgs),
    /// Train a model on every domain except the target
    Train(TrainArgs),
    /// Evaluate a saved model on one domain
    Eval(EvalArgs),
    /// Leave-one-domain-out comparison of algorithms
    Lodo(LodoArgs),
    /// Print the forests, weights and meta-task log of a model
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 4)]
    pub domains: usize,
    #[arg(long, default_value_t = 3)]
    pub classes: usize,
    #[arg(long, default_value_t = 10)]
    pub dim: usize,
    #[arg(long, default_value_t = 300)]
    pub per_domain: usize,
    #[arg(long, default_value_t = 2.0)]
    pub shift: f64,
    #[arg(long, default_value_t = 1.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Held-out domain; it is removed before training
    #[arg(long)]
    pub target: String,
    /// `baseline_rf` or `meta_forests`
    #[arg(long, default_value = "meta_forests")]
    pub algo: String,
    /// [default: 1]
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub domain: String,
    /// Also write the metrics as JSON
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LodoArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Comma-separated algorithm names [default: baseline_rf,meta_forests]
    #[arg(long, value_delimiter = ',')]
    pub algos: Option<Vec<String>>,
    /// [default: 20]
    #[arg(long)]
    pub repeats: Option<usize>,
    /// [default: 1]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Structured (JSON) report path
    #[arg(long, default_value = "lodo_report.json")]
    pub json: PathBuf,
    /// Tabular (CSV) report path
    #[arg(long, default_value = "lodo_report.csv")]
    pub csv: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Row order
    #[arg(long, value_enum, default_value = "index")]
    pub sort: SortKey,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SortKey {
    Index,
    Weight,
}

/// An error with the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_MODEL: u8 = 4;

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    /// Any error raised while reading or decoding a model file.
    pub fn model(e: metaforests::Error) -> Self {
        Self {
            code: EXIT_MODEL,
            message: e.to_string(),
        }
    }
}

impl From<metaforests::Error> for CliError {
    fn from(e: metaforests::Error) -> Self {
        use metaforests::Error as E;
        let code = match e {
            E::InvalidConfig(_) | E::InvalidSpec(_) => EXIT_USAGE,
            E::VersionMismatch { .. } | E::CorruptFile(_) => EXIT_MODEL,
            _ => EXIT_DATA,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

/// Runs a parsed command line, writing normal output to `out`.
pub fn run(cli: Cli, out: &mut dyn std::io::Write) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(path) => config::FileConfig::load(path)?,
        None => config::FileConfig::default(),
    };
    let env = std::env::var("METAFORESTS_THREADS").ok();
    let threads = config::resolve_threads(cli.threads, env.as_deref(), file.run.threads)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::usage(format!("cannot start thread pool: {e}")))?;
    let columns = commands::Columns {
        label: cli
            .label_col
            .clone()
            .or_else(|| file.data.label_col.clone())
            .unwrap_or_else(|| "label".into()),
        domain: cli
            .domain_col
            .clone()
            .or_else(|| file.data.domain_col.clone())
            .unwrap_or_else(|| "domain".into()),
    };
    let mut buf = Vec::new();
    let result = pool.install(|| match &cli.command {
        Command::Synth(a) => commands::cmd_synth(a, &columns, &mut buf),
        Command::Train(a) => commands::cmd_train(a, &file, &columns, &mut buf),
        Command::Eval(a) => commands::cmd_eval(a, &columns, &mut buf),
        Command::Lodo(a) => commands::cmd_lodo(a, &file, &columns, &mut buf),
        Command::Inspect(a) => commands::cmd_inspect(a, &mut buf),
    });
    out.write_all(&buf)
        .and_then(|_| out.flush())
        .map_err(|e| CliError {
            code: EXIT_DATA,
            message: format!("cannot write output: {e}"),
        })?;
    result
}
