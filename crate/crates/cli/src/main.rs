//! `centroid-leak`: run reconstruction experiments against simulated
//! federated k-means disclosures and print per-iteration success rates.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, ValueEnum};

use centroid_leak_core::harness::{
    emit_reconstructions, run_experiment, DatasetSource, ExperimentConfig,
};
use centroid_leak_core::kmeans::InitMethod;
use centroid_leak_core::{MatchMode, ReportFormat};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Source {
    Synthetic,
    Csv,
    PgmDir,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Criterion {
    /// Any exactly recovered value, single sample or aggregate.
    AnyExact,
    /// At least one individual sample recovered.
    StrictSingleton,
    /// At least one individual sample recovered and no wrong value certified.
    CleanSingleton,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Init {
    Forgy,
    KmeansPlusPlus,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(
    name = "centroid-leak",
    version,
    about = "Exact input reconstruction from disclosed k-means cluster sums"
)]
struct Args {
    /// Where samples come from.
    #[arg(long, value_enum, default_value = "synthetic")]
    dataset: Source,
    /// Synthetic sample count.
    #[arg(long, default_value_t = 20)]
    n: usize,
    /// Synthetic feature dimension.
    #[arg(long, default_value_t = 1)]
    d: usize,
    /// Smallest synthetic value (inclusive).
    #[arg(long, default_value_t = 0, allow_negative_numbers = true)]
    lo: i64,
    /// Largest synthetic value (inclusive).
    #[arg(long, default_value_t = 50, allow_negative_numbers = true)]
    hi: i64,
    /// Cluster count. Defaults to 4 (synthetic) or 3 (csv); required for pgm-dir.
    #[arg(long)]
    k: Option<usize>,
    /// Iteration cap.
    #[arg(long, default_value_t = 10)]
    max_iter: usize,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    /// Master seed; every trial derives its own streams from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Attack only the last L disclosed iterations.
    #[arg(long)]
    truncate_l: Option<usize>,
    /// What counts as a successful trial.
    #[arg(long, value_enum, default_value = "any-exact")]
    criterion: Criterion,
    /// Shorthand for --criterion strict-singleton.
    #[arg(long, conflicts_with = "criterion")]
    strict_singleton: bool,
    /// Centroid initialization.
    #[arg(long, value_enum, default_value = "forgy")]
    init: Init,
    /// Integer multiplier applied to csv cells before quantization.
    #[arg(long, default_value_t = 1)]
    scale: u64,
    /// Skip the first csv line.
    #[arg(long)]
    skip_header: bool,
    /// Input file (csv) or directory (pgm-dir).
    #[arg(long = "in")]
    input: Option<PathBuf>,
    /// Machine-readable report destination.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Write original/reconstructed PGM pairs here (pgm-dir only).
    #[arg(long)]
    emit_images: Option<PathBuf>,
    /// Coordinate whose delta signs drive trajectory building.
    #[arg(long, default_value_t = 0)]
    sign_coord: usize,
    /// Include per-trial records in the report.
    #[arg(long)]
    keep_trials: bool,
}

fn build_config(args: &Args) -> Result<ExperimentConfig> {
    let input = || {
        args.input
            .clone()
            .context("--in PATH is required for file-backed datasets")
    };
    let (source, default_k) = match args.dataset {
        Source::Synthetic => (
            DatasetSource::Synthetic {
                n: args.n,
                d: args.d,
                lo: args.lo,
                hi: args.hi,
            },
            Some(4),
        ),
        Source::Csv => (
            DatasetSource::Csv {
                path: input()?,
                scale: args.scale,
                skip_header: args.skip_header,
            },
            Some(3),
        ),
        Source::PgmDir => (DatasetSource::PgmDir { path: input()? }, None),
    };
    let Some(k) = args.k.or(default_k) else {
        bail!("--k is required for pgm-dir datasets");
    };
    if args.emit_images.is_some() && !matches!(args.dataset, Source::PgmDir) {
        bail!("--emit-images needs --dataset pgm-dir");
    }
    let criterion = match (args.strict_singleton, args.criterion) {
        (true, _) | (_, Criterion::StrictSingleton) => MatchMode::StrictSingleton,
        (false, Criterion::AnyExact) => MatchMode::AnyExact,
        (false, Criterion::CleanSingleton) => MatchMode::CleanSingleton,
    };
    Ok(ExperimentConfig {
        source,
        k,
        max_iter: args.max_iter,
        trials: args.trials,
        master_seed: args.seed,
        truncate_l: args.truncate_l,
        criterion,
        sign_coord: args.sign_coord,
        keep_trials: args.keep_trials,
        init: match args.init {
            Init::Forgy => InitMethod::Forgy,
            Init::KmeansPlusPlus => InitMethod::KmeansPlusPlus,
        },
    })
}

fn run(args: Args) -> Result<()> {
    let config = build_config(&args)?;
    let experiment = run_experiment(&config)?;
    print!("{}", experiment.report.to_table());

    if let Some(out) = &args.out {
        let format = match args.format {
            Format::Json => ReportFormat::Json,
            Format::Csv => ReportFormat::Csv,
        };
        experiment.report.write(out, format)?;
        eprintln!("report written to {}", out.display());
    }
    if let (Some(dir), Some(images)) = (&args.emit_images, &experiment.images) {
        let pairs = emit_reconstructions(&experiment.outcomes, images, dir)?;
        eprintln!(
            "{pairs} reconstructed image pair(s) written to {}",
            dir.display()
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
