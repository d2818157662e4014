//! Drive the experiment runner from a JSON config, as the `crp eval`
//! command does.
//!
//!     cargo run --example run_experiment -- configs/synthetic_sweeps.json /tmp/crp-out

use std::path::PathBuf;

use crp::experiment::{run_experiment, ExperimentConfig};

fn main() -> crp::error::Result<()> {
    env_logger::init();
    let mut args = std::env::args().skip(1);
    let config = args.next().map(PathBuf::from).unwrap_or_else(|| {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/synthetic_sweeps.json")
    });
    let out = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("crp-experiment"));

    let cfg = ExperimentConfig::load(&config)?;
    let summary = run_experiment(&cfg, &out)?;
    for g in &summary.grid {
        println!(
            "λ = {:<8} {:5.1} ± {:4.1}",
            g.lambda.unwrap_or(0.0),
            100.0 * g.result.mean,
            100.0 * g.result.std
        );
    }
    println!("best λ = {:?}", summary.best.lambda);
    for s in &summary.sweeps {
        println!(
            "{} = {:<10} {:5.1} ± {:4.1}",
            s.sweep,
            s.value,
            100.0 * s.result.mean,
            100.0 * s.result.std
        );
    }
    println!("outputs in {}", out.display());
    Ok(())
}
