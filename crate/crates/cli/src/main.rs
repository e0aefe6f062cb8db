use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fastflow_cli::commands::{regret_cmd, run, train_toy, verify_bound_cmd};
use fastflow_cli::report::report;
use fastflow_cli::{CliError, ExperimentConfig};

#[derive(Parser)]
#[command(name = "fastflow", version, about = "Bandit-driven step skipping for flow-matching samplers")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment configuration (flat key = value file).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides run.seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Overrides run.out.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Continue bandit learning from a saved registry.
    #[arg(long, global = true)]
    resume_registry: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Train the toy flow-matching field and write a checkpoint.
    TrainToy,
    /// Sample generations and append them to results.jsonl.
    Run,
    /// Check the single-skip error bound on an analytic field.
    VerifyBound,
    /// Mean cumulative UCB regret on a synthetic Bernoulli instance.
    Regret,
    /// Summarize a results directory (defaults to run.out).
    Report { dir: Option<PathBuf> },
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = cli.out {
        cfg.out = out;
    }
    cfg.validate()?;
    match cli.command {
        Command::TrainToy => {
            let o = train_toy(&cfg)?;
            println!(
                "checkpoint {} (loss {} -> {})",
                o.checkpoint.display(),
                o.initial_loss.map_or("-".into(), |v| format!("{v:.4}")),
                o.final_loss.map_or("-".into(), |v| format!("{v:.4}"))
            );
        }
        Command::Run => {
            let o = run(&cfg, cli.resume_registry.as_deref())?;
            let n = o.records.len() as f64;
            let speedup = o.records.iter().map(|r| r.metrics.speedup).sum::<f64>() / n;
            println!("{} generations, mean speedup {speedup:.3}x", o.records.len());
            if let Some(p) = o.registry {
                println!("registry {}", p.display());
            }
        }
        Command::VerifyBound => {
            for r in verify_bound_cmd(&cfg)? {
                println!(
                    "T={:<4} |S|={:<3} e_T={:.6e} bound={:.6e} {}",
                    r.steps,
                    r.skipped,
                    r.empirical,
                    r.bound,
                    if r.satisfied { "ok" } else { "VIOLATED" }
                );
            }
        }
        Command::Regret => {
            let curve = regret_cmd(&cfg)?;
            println!("regret({}) = {:.3}", curve.len(), curve.last().copied().unwrap_or(0.0));
        }
        Command::Report { dir } => {
            let dir = dir.unwrap_or_else(|| cfg.out.clone());
            let o = report(&dir)?;
            println!("{} configurations; wrote {}", o.summaries.len(), o.files.join(", "));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
