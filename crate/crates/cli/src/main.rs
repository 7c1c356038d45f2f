mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use reweigh_core::data::DatasetId;
use reweigh_core::influence::FairnessNotion;
use reweigh_core::pipeline::{DEFAULT_ALPHA, DEFAULT_SEED};

/// Influence-based training-sample reweighing for fair logistic regression.
#[derive(Debug, Parser)]
#[command(name = "reweigh", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Ingest a raw dataset into standardized train/val/test splits.
    Prepare(PrepareArgs),
    /// Compute influences, solve for sample weights and retrain.
    Reweigh(ReweighArgs),
    /// Select hyperparameters on validation, then run the selected config.
    Grid(GridArgs),
    /// Compare predicted influence with retraining.
    Diag {
        #[command(subcommand)]
        study: DiagStudy,
    },
    /// Write a synthetic prepared dataset with label bias against one group.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct PrepareArgs {
    /// Built-in dataset to read from --raw-dir.
    #[arg(long, required_unless_present = "csv", conflicts_with = "csv")]
    dataset: Option<DatasetId>,
    /// Directory with the raw benchmark files.
    #[arg(long, default_value = "data")]
    raw_dir: PathBuf,
    /// Plain CSV input; needs --config.
    #[arg(long, requires = "config")]
    csv: Option<PathBuf>,
    /// Ingestion config (JSON); replaces the built-in one for --dataset.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Output directory for the prepared splits.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Directory written by `prepare` or `synth`.
    #[arg(long)]
    dataset_dir: PathBuf,
    #[arg(long, default_value = "eop")]
    notion: FairnessNotion,
    /// Total L2 strength; defaults to the value suggested in the metadata.
    #[arg(long)]
    l2: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ReweighArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, default_value_t = 0.0)]
    beta: f64,
    #[arg(long, default_value_t = 0.0)]
    gamma: f64,
    /// Budget share for the fallback program.
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    /// Also write the solved program in LP format.
    #[arg(long)]
    dump_lp: bool,
}

#[derive(Debug, Args)]
struct GridArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// JSON file with `betas`, `gammas` and `alphas`; defaults to the full grid.
    #[arg(long)]
    grid: Option<PathBuf>,
    /// Allowed drop in validation accuracy for a candidate.
    #[arg(long, default_value_t = 0.0)]
    tol_acc: f64,
    #[arg(long)]
    dump_lp: bool,
}

#[derive(Debug, Subcommand)]
enum DiagStudy {
    /// Leave-one-out removals.
    Loo {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 100)]
        n: usize,
    },
    /// Removal of random groups.
    Group {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 60)]
        size: usize,
        #[arg(long, default_value_t = 50)]
        groups: usize,
    },
    /// Small downweighting, compared by finite differences.
    Epsilon {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 20)]
        n: usize,
        #[arg(long, value_delimiter = ',', default_value = "0.01,0.001,0.0001")]
        epsilons: Vec<f64>,
    },
    /// Label flips next to removals of the same samples.
    Flip {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 100)]
        n: usize,
    },
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 600)]
    n_train: usize,
    #[arg(long, default_value_t = 200)]
    n_val: usize,
    #[arg(long, default_value_t = 200)]
    n_test: usize,
    #[arg(long, default_value_t = 12)]
    n_features: usize,
    #[arg(long, default_value_t = 0.35)]
    label_bias: f64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or_default().trim_start_matches("error: ");
            commands::report_error("usage", first);
            return ExitCode::from(commands::EXIT_USAGE);
        }
    };
    let result = match cli.command {
        Command::Prepare(a) => commands::prepare(a),
        Command::Reweigh(a) => commands::reweigh(a),
        Command::Grid(a) => commands::grid(a),
        Command::Diag { study } => commands::diag(study),
        Command::Synth(a) => commands::synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => ExitCode::from(commands::fail(&e)),
    }
}
