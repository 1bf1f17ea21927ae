mod config;
mod experiments;
mod output;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context as _, Result};
use clap::{Parser, Subcommand};

use config::Config;
use experiments::Context;

#[derive(Parser)]
#[command(name = "specrep", version, about = "Boundary representation experiments on free-group trees")]
struct Cli {
    /// JSON config; every field is optional.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for CSV and JSON artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Zero-mean spectra of the boundary kernels.
    Spectrum,
    /// Energy asymptotics along a ray.
    KuhnVershik,
    /// Fit of the fundamental identity over random pairs.
    FundamentalIdentity,
    /// Random-walk drift against the energy growth.
    Drift,
    /// Pair equidistribution against the sphere measures.
    Equidist,
    /// Arity-1 and arity-2 cocycle averages.
    AffineAverage,
    /// Negative-type check of the word metric.
    Negtype,
    /// Cone counts and cover sizes.
    Counting,
    /// Collects every artifact into summary.json.
    Report,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::KuhnVershik => "kuhn-vershik",
            Command::FundamentalIdentity => "fundamental-identity",
            Command::Drift => "drift",
            Command::Equidist => "equidist",
            Command::AffineAverage => "affine-average",
            Command::Negtype => "negtype",
            Command::Counting => "counting",
            Command::Report => "report",
        }
    }
}

fn run(cli: &Cli) -> Result<bool> {
    let mut config = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let group = config.validate()?;
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    std::fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    let hash = config.hash();
    if let Command::Report = cli.command {
        let summary = report::build(&cli.out, &hash)?;
        report::write(&cli.out, &summary)?;
        for name in &summary.acceptance.failed {
            eprintln!("failed: {name}");
        }
        return Ok(summary.acceptance.all);
    }
    let ctx = Context {
        config: &config,
        group,
        hash,
        out: &cli.out,
    };
    let record = experiments::run(cli.command.name(), &ctx)?;
    record.write(&cli.out)?;
    for (key, value) in &record.metrics {
        if key.starts_with("check_") && value == &serde_json::Value::Bool(false) {
            eprintln!("{}: {key} failed", record.name);
        }
    }
    Ok(record.pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
