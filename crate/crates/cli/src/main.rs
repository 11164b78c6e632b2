use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

mod config;
mod stages;

use config::PipelineConfig;
use stages::Stages;
use urntopics::neighbors::Strategy;

/// Topical phrase extraction with a promotion-aware topic model.
#[derive(Parser)]
#[command(name = "urntopics", version, about)]
struct Cli {
    /// Configuration file (flat `section.key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Sampler seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of topics.
    #[arg(long, global = true)]
    topics: Option<usize>,
    /// Gibbs sweeps.
    #[arg(long, global = true)]
    iterations: Option<usize>,
    /// Promotion mode: identity, context, or idf.
    #[arg(long, global = true)]
    promotion: Option<String>,
    /// Local neighbor cosine threshold.
    #[arg(long, global = true, conflicts_with = "topn_local")]
    tau: Option<f64>,
    /// Global neighbor cosine threshold.
    #[arg(long, global = true, conflicts_with = "topn_global")]
    sigma: Option<f64>,
    /// Keep the N most similar local neighbors instead of thresholding.
    #[arg(long, global = true)]
    topn_local: Option<usize>,
    /// Keep the N most similar global neighbors instead of thresholding.
    #[arg(long, global = true)]
    topn_global: Option<usize>,
    /// Output directory for artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Rebuild fresh artifacts and accept stale ones.
    #[arg(long, global = true)]
    force: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tokenize, compound phrases, and filter the corpus.
    Preprocess,
    /// Factorize the term-document matrix into corpus embeddings.
    Lsa,
    /// Build local and global neighbor sets.
    Neighbors,
    /// Assemble the promotion matrix.
    Promote,
    /// Run the collapsed Gibbs sampler.
    Train,
    /// Score trained topics with UMass coherence.
    Coherence,
    /// Cross-validated search over (tau, sigma) threshold pairs.
    GridSearch,
    /// Run every stage in order.
    Pipeline,
}

fn apply_overrides(cli: &Cli, config: &mut PipelineConfig) -> Result<()> {
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(topics) = cli.topics {
        config.topics = topics;
    }
    if let Some(iterations) = cli.iterations {
        config.iterations = iterations;
    }
    if let Some(mode) = cli.promotion.as_deref() {
        config.mode = config::parse_mode(mode).context("--promotion")?;
    }
    if let Some(tau) = cli.tau {
        config.local = Strategy::Threshold(tau);
    }
    if let Some(n) = cli.topn_local {
        config.local = Strategy::TopN(n);
    }
    if let Some(sigma) = cli.sigma {
        config.global = Strategy::Threshold(sigma);
    }
    if let Some(n) = cli.topn_global {
        config.global = Strategy::TopN(n);
    }
    if let Some(out) = &cli.out {
        config.out = out.clone();
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::init();
    let cli = Cli::parse();
    let mut config = PipelineConfig::load(cli.config.as_deref())?;
    apply_overrides(&cli, &mut config)?;
    config.validate_paths()?;
    std::fs::create_dir_all(&config.out)
        .with_context(|| format!("cannot create output directory {}", config.out.display()))?;
    let stages = Stages::new(&config, cli.force);
    match cli.command {
        Command::Preprocess => stages.preprocess().context("stage preprocess"),
        Command::Lsa => stages.lsa().context("stage lsa"),
        Command::Neighbors => stages.neighbors().context("stage neighbors"),
        Command::Promote => stages.promote().context("stage promote"),
        Command::Train => stages.train().context("stage train"),
        Command::Coherence => stages.coherence().context("stage coherence"),
        Command::GridSearch => stages.grid_search().context("stage grid-search"),
        Command::Pipeline => stages.pipeline(),
    }
}
