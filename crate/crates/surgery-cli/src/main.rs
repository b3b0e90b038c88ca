//! One binary for the whole pipeline: data generation, the training stages,
//! benchmark evaluation, and activation analysis.

mod commands;
mod config;
mod manifest;

use clap::{Parser, Subcommand};
use std::path::PathBuf;

use surgery_core::train::Stage;

/// Exit codes: 0 success, 2 configuration or usage error, 3 provenance
/// error, 4 numeric divergence, 5 I/O or integrity failure.
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_PROVENANCE: i32 = 3;
pub const EXIT_DIVERGENCE: i32 = 4;
pub const EXIT_IO: i32 = 5;

#[derive(Parser)]
#[command(
    name = "surgery",
    about = "Unlearn/update/retain training laboratory for a small language model"
)]
struct Cli {
    /// Worker threads for training and evaluation (default: all cores;
    /// env SURGERY_THREADS overrides the default).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Single-threaded, bit-reproducible mode.
    #[arg(long, global = true)]
    deterministic: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum StageArg {
    Pretrain,
    Baseline,
    Surgery,
    GdOnly,
    GdKl,
}

impl From<StageArg> for Stage {
    fn from(s: StageArg) -> Stage {
        match s {
            StageArg::Pretrain => Stage::Pretrain,
            StageArg::Baseline => Stage::Baseline,
            StageArg::Surgery => Stage::Surgery,
            StageArg::GdOnly => Stage::GdOnly,
            StageArg::GdKl => Stage::GdKl,
        }
    }
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum SplitArg {
    Val,
    Test,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the corpora, benchmarks, and manifest into a directory.
    GenData {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (env SURGERY_OUT_DIR when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overwrite an existing non-empty directory.
        #[arg(long)]
        force: bool,
    },
    /// Run one training stage and write a checkpoint plus metrics.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        stage: StageArg,
        /// Directory produced by gen-data.
        #[arg(long)]
        data: PathBuf,
        /// Input checkpoint (required for the editing stages).
        #[arg(long = "in")]
        input: Option<PathBuf>,
        /// Mid-stage checkpoint to resume from.
        #[arg(long)]
        resume: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Metrics JSONL path (default: <out>.metrics.jsonl).
        #[arg(long)]
        metrics: Option<PathBuf>,
        /// Override the configured step count.
        #[arg(long)]
        steps: Option<u64>,
        /// Override the configured retain fraction.
        #[arg(long)]
        retain_fraction: Option<f64>,
    },
    /// Score checkpoints on the MCQA benchmarks and emit the report.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Checkpoints to evaluate (repeatable).
        #[arg(long = "ckpt", required = true)]
        ckpts: Vec<PathBuf>,
        /// Benchmarks to run (default: all three).
        #[arg(long = "benchmark")]
        benchmarks: Vec<String>,
        /// Also evaluate the freshly initialized base model.
        #[arg(long)]
        with_base: bool,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Activation profiles per (model, dataset) and pairwise similarities.
    AnalyzeActivations {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Checkpoints to profile (at least two).
        #[arg(long = "ckpt", required = true)]
        ckpts: Vec<PathBuf>,
        /// Token budget per (model, dataset) profile.
        #[arg(long)]
        max_tokens: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn resolve_threads(flag: Option<usize>, deterministic: bool) -> usize {
    if deterministic {
        return 1;
    }
    if let Some(n) = flag {
        return n.max(1);
    }
    if let Ok(v) = std::env::var("SURGERY_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            return n.max(1);
        }
    }
    0 // rayon default: one per core
}

fn resolve_out(flag: Option<PathBuf>) -> anyhow::Result<PathBuf> {
    if let Some(p) = flag {
        return Ok(p);
    }
    if let Ok(v) = std::env::var("SURGERY_OUT_DIR") {
        return Ok(PathBuf::from(v));
    }
    anyhow::bail!("no output path: pass --out or set SURGERY_OUT_DIR")
}

fn exit_code_for(err: &anyhow::Error) -> i32 {
    use surgery_core::Error as E;
    if let Some(core) = err.downcast_ref::<E>() {
        return match core {
            E::Provenance { .. } => EXIT_PROVENANCE,
            E::Divergence { .. } | E::NonFinite { .. } => EXIT_DIVERGENCE,
            E::Io { .. } | E::Integrity { .. } | E::Version { .. } | E::Malformed { .. } => EXIT_IO,
            _ => EXIT_CONFIG,
        };
    }
    if err.downcast_ref::<std::io::Error>().is_some() {
        return EXIT_IO;
    }
    EXIT_CONFIG
}

fn main() {
    let cli = Cli::parse();
    let threads = resolve_threads(cli.threads, cli.deterministic);
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .expect("rayon pool initializes once");
    }

    let outcome = match cli.command {
        Command::GenData { config, out, force } => {
            resolve_out(out).and_then(|out| commands::gen_data::run(&config, &out, force))
        }
        Command::Train {
            config,
            stage,
            data,
            input,
            resume,
            out,
            metrics,
            steps,
            retain_fraction,
        } => resolve_out(out).and_then(|out| {
            commands::train::run(commands::train::Args {
                config: &config,
                stage: stage.into(),
                data: &data,
                input: input.as_deref(),
                resume: resume.as_deref(),
                out: &out,
                metrics: metrics.as_deref(),
                steps,
                retain_fraction,
            })
        }),
        Command::Eval {
            config,
            data,
            ckpts,
            benchmarks,
            with_base,
            split,
            out,
        } => resolve_out(out).and_then(|out| {
            commands::eval::run(commands::eval::Args {
                config: &config,
                data: &data,
                ckpts: &ckpts,
                benchmarks: &benchmarks,
                with_base,
                validation_split: matches!(split, SplitArg::Val),
                out: &out,
            })
        }),
        Command::AnalyzeActivations {
            config,
            data,
            ckpts,
            max_tokens,
            out,
        } => resolve_out(out).and_then(|out| {
            commands::analyze::run(&config, &data, &ckpts, max_tokens, &out)
        }),
    };

    match outcome {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(exit_code_for(&err));
        }
    }
}
