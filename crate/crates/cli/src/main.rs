mod cmd;
mod config;
mod io;
mod provider;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::Config;

/// Content masking, episode retrieval, paraphrase gating and group-pooled
/// discrimination for authorship embeddings.
///
/// Exit status: 0 on success, 1 on input or validation errors, 2 when the
/// embedding provider or its transport fails.
#[derive(Parser, Debug)]
#[command(name = "styleprobe", version, propagate_version = true)]
struct Cli {
    /// TOML file of flat `key = value` settings; command-line flags win
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Root seed for every random choice in the command
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (default: one per core)
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Mask content words with PertLE (POS tags) or TertLE (TF-IDF)
    Mask(cmd::mask::Args),
    /// Fit a TF-IDF model for TertLE masking
    TfidfFit(cmd::tfidf::Args),
    /// Build author episodes and a query/target set from a corpus
    Episodes(cmd::episodes::Args),
    /// Rank targets for each query episode and report MRR
    Rank(cmd::rank::Args),
    /// Gate paraphrased episodes to their best-preserved documents
    Gate(cmd::gate::Args),
    /// Sweep group sizes for label discrimination (ROC, EER, AUC)
    Discriminate(cmd::discriminate::Args),
    /// Significance tests on CSV input
    Stats(cmd::stats::Args),
}

/// Marks failures that happened while constructing or calling a provider.
#[derive(Debug)]
pub struct ProviderFailure(pub styleprobe::Error);

impl std::fmt::Display for ProviderFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

impl std::error::Error for ProviderFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.0)
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<ProviderFailure>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<styleprobe::Error>() {
            if e.is_provider_failure() {
                return 2;
            }
        }
    }
    1
}

fn configure_threads(threads: Option<usize>) -> anyhow::Result<()> {
    let Some(n) = threads else { return Ok(()) };
    anyhow::ensure!(n >= 1, "--threads must be at least 1");
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()?;
    #[cfg(not(feature = "parallel"))]
    log::info!("built without the parallel feature; ignoring --threads {n}");
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let config = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    let ctx = config::Context {
        seed: cli.seed.or(config.seed),
        config,
    };
    configure_threads(cli.threads.or(ctx.config.threads))?;
    match cli.command {
        Command::Mask(a) => cmd::mask::run(a, &ctx),
        Command::TfidfFit(a) => cmd::tfidf::run(a, &ctx),
        Command::Episodes(a) => cmd::episodes::run(a, &ctx),
        Command::Rank(a) => cmd::rank::run(a, &ctx),
        Command::Gate(a) => cmd::gate::run(a, &ctx),
        Command::Discriminate(a) => cmd::discriminate::run(a, &ctx),
        Command::Stats(a) => cmd::stats::run(a, &ctx),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
