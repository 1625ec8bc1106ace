//! `gaia-lab`: trains adversarial-autoencoder and baseline models on 2D toy
//! datasets, evaluates latent-structure metrics, and renders figures.
//!
//! Exit codes: 0 success, 1 internal error, 2 configuration error,
//! 3 training divergence, 4 I/O error.

mod checkpoint;
mod config;
mod error;
mod eval;
mod manifest;
mod run;

use clap::{Args, Parser, Subcommand};
use config::ExperimentConfig;
use error::Result;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(
    name = "gaia-lab",
    version,
    about = "Adversarial autoencoder experiments on 2D toy datasets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
struct CommonArgs {
    /// TOML experiment config; omitted means all defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run directory for all artifacts.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the experiment seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override parallel grid cells (0 = one per core).
    #[arg(long)]
    jobs: Option<usize>,
    /// Override the model list (comma-separated: ae,vae,gaia-nodist,gaia).
    #[arg(long, value_delimiter = ',')]
    models: Option<Vec<String>>,
    /// Override the dataset list (comma-separated: moons,circles,s-curve,swiss-roll,blobs).
    #[arg(long, value_delimiter = ',')]
    datasets: Option<Vec<String>>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the train/eval dataset samples as CSV.
    GenerateData(CommonArgs),
    /// Train the whole grid and produce checkpoints, metrics, and figures.
    Train(CommonArgs),
    /// Recompute metrics from existing checkpoints.
    Evaluate(CommonArgs),
    /// Aggregate metrics.csv into the per-model comparison table.
    Compare(CommonArgs),
    /// Re-render figures from existing checkpoints.
    Plot(CommonArgs),
    /// Extract latent attribute vectors from existing checkpoints.
    AttrVectors(CommonArgs),
}

impl CommonArgs {
    /// Loads the config file (or defaults) and applies flag overrides, then
    /// re-validates the combined result.
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::from_path(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.experiment.seed = seed;
        }
        if let Some(jobs) = self.jobs {
            config.experiment.jobs = jobs;
        }
        if let Some(models) = &self.models {
            config.experiment.models = models.clone();
        }
        if let Some(datasets) = &self.datasets {
            config.experiment.datasets = datasets.clone();
        }
        config.validate()?;
        Ok(config)
    }
}

fn dispatch(command: &Command) -> Result<()> {
    let (args, run): (&CommonArgs, fn(&ExperimentConfig, &std::path::Path) -> Result<()>) =
        match command {
            Command::GenerateData(a) => (a, run::cmd_generate_data),
            Command::Train(a) => (a, run::cmd_train),
            Command::Evaluate(a) => (a, run::cmd_evaluate),
            Command::Compare(a) => (a, run::cmd_compare),
            Command::Plot(a) => (a, run::cmd_plot),
            Command::AttrVectors(a) => (a, run::cmd_attr_vectors),
        };
    let config = args.resolve()?;
    run(&config, &args.out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
