use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ia_arena::harness::{
    run_evaluation, run_experiment, run_seeds, write_metrics, write_summary, AllocatorKind, ExperimentConfig,
    ExperimentResult, SummaryRow,
};
use ia_arena::nn::gradcheck::{run_suite, REL_TOLERANCE};
use ia_arena::nn::Checkpoint;
use ia_arena::{ArenaError, Result};

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

#[derive(Parser)]
#[command(name = "ia-arena", version, about = "Impression allocation experiments with strategic sellers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON experiment config; unspecified fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override a config field, e.g. --set rl.gamma=0.9 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a heuristic allocator (greedy or linucb) and write its metrics.
    Simulate(Common),
    /// Train a learned allocator; writes metrics and a checkpoint.
    Train(Common),
    /// Evaluate a trained checkpoint without further learning.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Run several allocators over several seeds and summarise.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        seeds: usize,
        /// Comma-separated subset of greedy,linucb,ddpg,iagru.
        #[arg(long, value_delimiter = ',', default_values_t = ["greedy".to_string(), "linucb".into(), "ddpg".into(), "iagru".into()])]
        allocators: Vec<String>,
    },
    /// Finite-difference check of every differentiable operator.
    Gradcheck {
        #[arg(long, default_value_t = 100)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let base = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    base.with_overrides(&common.overrides)
}

fn prepare_out(dir: &Path, config: &ExperimentConfig) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.json"), config.to_json())?;
    Ok(())
}

fn write_csv(path: &Path, result: &ExperimentResult) -> Result<()> {
    write_metrics(&result.rows, BufWriter::new(File::create(path)?))
}

fn report(result: &ExperimentResult, path: &Path) {
    println!(
        "{}: mean eval reward {:.6} over {} rounds -> {}",
        result.config.allocator.name(),
        result.mean_eval_reward(),
        result.eval_rows().len(),
        path.display()
    );
}

fn parse_allocator(name: &str) -> Result<AllocatorKind> {
    AllocatorKind::ALL
        .into_iter()
        .find(|k| k.name() == name.trim())
        .ok_or_else(|| ArenaError::Config(format!("unknown allocator {name:?}")))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(common) => {
            let config = load_config(&common)?;
            if config.allocator.is_learned() {
                return Err(ArenaError::Config(format!(
                    "simulate runs heuristic allocators; use `train` for {}",
                    config.allocator.name()
                )));
            }
            prepare_out(&common.out, &config)?;
            let result = run_experiment(&config)?;
            let path = common.out.join("metrics.csv");
            write_csv(&path, &result)?;
            report(&result, &path);
        }
        Command::Train(common) => {
            let config = load_config(&common)?;
            if !config.allocator.is_learned() {
                return Err(ArenaError::Config(format!("{} is not a learned allocator", config.allocator.name())));
            }
            if config.sellers > config.group_size {
                return Err(ArenaError::Config("train writes one checkpoint and needs sellers <= group_size".into()));
            }
            prepare_out(&common.out, &config)?;
            let result = run_experiment(&config)?;
            let path = common.out.join("metrics.csv");
            write_csv(&path, &result)?;
            if let Some(ckpt) = &result.checkpoint {
                ckpt.save(&common.out.join("checkpoint.txt"))?;
            }
            report(&result, &path);
        }
        Command::Evaluate { common, checkpoint } => {
            let config = load_config(&common)?;
            let ckpt = Checkpoint::load(&checkpoint)?;
            prepare_out(&common.out, &config)?;
            let result = run_evaluation(&config, &ckpt)?;
            let path = common.out.join("metrics.csv");
            write_csv(&path, &result)?;
            report(&result, &path);
        }
        Command::Compare { common, seeds, allocators } => {
            if seeds == 0 {
                return Err(ArenaError::Config("--seeds must be at least 1".into()));
            }
            let base = load_config(&common)?;
            let kinds = allocators.iter().map(|a| parse_allocator(a)).collect::<Result<Vec<_>>>()?;
            prepare_out(&common.out, &base)?;
            let mut summary = Vec::new();
            for kind in kinds {
                let config = ExperimentConfig { allocator: kind, ..base.clone() };
                let results = run_seeds(&config, seeds)?;
                for (k, result) in results.iter().enumerate() {
                    let name =
                        if seeds == 1 { format!("{}.csv", kind.name()) } else { format!("{}_s{k}.csv", kind.name()) };
                    write_csv(&common.out.join(name), result)?;
                }
                let row = SummaryRow::from_results(&results);
                println!(
                    "{}: mean eval reward {:.6} (std {:.6}, {} seeds)",
                    kind.name(),
                    row.mean_eval_reward,
                    row.std_eval_reward,
                    seeds
                );
                summary.push(row);
            }
            write_summary(&summary, BufWriter::new(File::create(common.out.join("summary.csv"))?))?;
        }
        Command::Gradcheck { instances, seed } => {
            let reports = run_suite(seed, instances);
            for r in &reports {
                println!(
                    "{:<28} {:>4} instances  max rel error {:.3e}  {}",
                    r.name,
                    r.instances,
                    r.max_rel_error,
                    if r.passed() { "ok" } else { "FAIL" }
                );
            }
            if reports.iter().any(|r| !r.passed()) {
                return Err(ArenaError::Config(format!("gradient check exceeded relative error {REL_TOLERANCE:e}")));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    if let Some(n) = std::env::var("IA_ARENA_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        // Ignore the error if a pool was already installed.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
