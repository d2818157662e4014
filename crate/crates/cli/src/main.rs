use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use crp::error::{CrpError, Result};
use crp::experiment::{run_bench, run_experiment, run_fit, run_trace, ExperimentConfig};
use crp::lemmas::{check_lemmas, LemmaConfig};

/// Compound rank-k projection experiments.
///
/// Exit status: 0 success, 1 lemma violation, 2 config error, 3 data error,
/// 4 numerical failure.
#[derive(Parser)]
#[command(name = "crp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to the config's `out_dir`, then `out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the split seed in the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the configured method on the full dataset and write model.json.
    Fit(Common),
    /// Run the evaluation protocol over the λ grid.
    Eval(Common),
    /// Compare every method on matched splits.
    Bench(Common),
    /// Write the objective trace of one randomly chosen pair.
    Trace(Common),
    /// Verify the Kronecker/vec/trace identities numerically.
    CheckLemmas {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
    },
}

fn load(c: &Common) -> Result<(ExperimentConfig, PathBuf)> {
    let mut cfg = ExperimentConfig::load(&c.config)?;
    if let Some(seed) = c.seed {
        cfg = cfg.with_seed(seed);
    }
    let out = c
        .out
        .clone()
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    Ok((cfg, out))
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Fit(c) => {
            let (cfg, out) = load(&c)?;
            if let Some(m) = run_fit(&cfg, &out)? {
                println!(
                    "wrote {} model to {}",
                    m.kind(),
                    out.join("model.json").display()
                );
            }
        }
        Command::Eval(c) => {
            let (cfg, out) = load(&c)?;
            let s = run_experiment(&cfg, &out)?;
            let lambda = s
                .best
                .lambda
                .map(|l| format!(" at lambda={l}"))
                .unwrap_or_default();
            println!(
                "{}: {:.2} ± {:.2}{lambda}",
                cfg.method.name(),
                100.0 * s.best.mean,
                100.0 * s.best.std
            );
        }
        Command::Bench(c) => {
            let (cfg, out) = load(&c)?;
            for row in run_bench(&cfg, &out)? {
                println!(
                    "{:<8} {:6.2} ± {:5.2}",
                    row.method.name(),
                    100.0 * row.result.mean,
                    100.0 * row.result.std
                );
            }
        }
        Command::Trace(c) => {
            let (cfg, out) = load(&c)?;
            let t = run_trace(&cfg, &out)?;
            println!(
                "pair {}: {} iterations, final objective {:e}, converged={}",
                t.pair_index,
                t.objective.len(),
                t.objective.last().copied().unwrap_or(0.0),
                t.converged
            );
        }
        Command::CheckLemmas {
            config,
            out,
            seed,
            trials,
        } => {
            let mut lc = match config {
                Some(p) => LemmaConfig::load(p)?,
                None => LemmaConfig::default(),
            };
            lc.seed = seed.unwrap_or(lc.seed);
            lc.trials = trials.unwrap_or(lc.trials);
            let report = check_lemmas(lc.trials, lc.seed)?;
            print!("{report}");
            if let Some(dir) = out {
                write_report(&dir, &report)?;
            }
            if !report.passed() {
                for l in report.failures() {
                    eprintln!(
                        "violation: Lemma {} error {:.3e} > {:e} at shapes {:?}",
                        l.lemma, l.max_rel_error, report.tolerance, l.worst_shapes
                    );
                }
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn write_report(dir: &Path, report: &crp::lemmas::LemmaReport) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CrpError::io(dir, e))?;
    let path = dir.join("lemmas.txt");
    std::fs::write(&path, report.to_string()).map_err(|e| CrpError::io(&path, e))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
