//! `kf`: build base kernels, evolve kernel combinations, run the three-way
//! comparison and query similarity indexes.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kf_core::QueryOrder;

use commands::{SynthKind, SynthOptions};
use config::{Overrides, RunConfig};
use error::CliError;

#[derive(Parser)]
#[command(name = "kf", version, about = "Evolve non-linear combinations of kernel matrices")]
struct Cli {
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration.
    #[arg(long, short)]
    config: Option<PathBuf>,

    /// Override one configuration key, e.g. `--set gp.population_size=80`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,

    #[arg(long)]
    seed: Option<u64>,

    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Gaussian kernel per descriptor CSV, plus manifest and labels.
    Gram(RunArgs),
    /// Evolve a kernel expression on one split and keep the final model.
    Evolve(RunArgs),
    /// Addition vs. best single vs. evolved kernel over repeated splits.
    Compare(RunArgs),
    /// Build a similarity index from a kernel expression.
    Index(RunArgs),
    /// Most similar items to one item of an index.
    Retrieve {
        #[arg(long)]
        index: PathBuf,
        /// Item id, or its zero-based position.
        #[arg(long)]
        item: String,
        #[arg(long, default_value_t = 10)]
        k: usize,
        /// `similarity` (highest first) or `paper-min` (lowest first).
        #[arg(long, default_value = "similarity")]
        order: String,
    },
    /// Pretty-print a kernel expression.
    Inspect {
        /// File holding one prefix expression.
        file: Option<PathBuf>,
        #[arg(long)]
        expr: Option<String>,
    },
    /// Write a generated multi-view dataset and a starter config.
    Synth {
        #[arg(long, value_enum, default_value = "modular")]
        kind: SynthKind,
        #[arg(long, default_value_t = 60)]
        per_class: usize,
        #[arg(long, default_value_t = 0.25)]
        noise: f64,
        #[arg(long, default_value_t = 3)]
        views: usize,
        #[arg(long, default_value_t = 0)]
        informative: usize,
        #[arg(long, default_value_t = 3)]
        classes: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load(args: &RunArgs, threads: Option<usize>) -> Result<RunConfig, CliError> {
    RunConfig::load(
        args.config.as_deref(),
        &Overrides {
            sets: args.sets.clone(),
            seed: args.seed,
            out: args.out.clone(),
            threads,
        },
    )
}

fn pool(threads: Option<usize>) -> Result<rayon::ThreadPool, CliError> {
    if threads == Some(0) {
        return Err(CliError::Config("--threads must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Gram(a) | Command::Evolve(a) | Command::Compare(a) | Command::Index(a) => {
            let config = load(a, cli.threads)?;
            pool(config.threads)?.install(|| match &cli.command {
                Command::Gram(_) => commands::gram(&config),
                Command::Evolve(_) => commands::evolve_cmd(&config),
                Command::Compare(_) => commands::compare(&config),
                _ => commands::index(&config),
            })
        }
        Command::Retrieve { index, item, k, order } => {
            let order: QueryOrder = order.parse()?;
            commands::retrieve(index, item, *k, order)
        }
        Command::Inspect { file, expr } => commands::inspect(file.as_deref(), expr.as_deref()),
        Command::Synth {
            kind,
            per_class,
            noise,
            views,
            informative,
            classes,
            seed,
            out,
        } => commands::synth(&SynthOptions {
            kind: *kind,
            per_class: *per_class,
            noise: *noise,
            views: *views,
            informative: *informative,
            classes: *classes,
            seed: *seed,
            out: out.clone(),
        }),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("KF_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.kind().exit_code() as u8)
        }
    }
}
