//! Objective value after every alternating iteration for one pair.
//!
//!     cargo run --example convergence_trace

use crp::crp::problem::Deviations;
use crp::crp::{fit_pair, CrpConfig};
use crp::dataio::{synth_dataset, SynthSpec};

fn main() -> crp::error::Result<()> {
    let d = synth_dataset(&SynthSpec {
        classes: 3,
        per_class: 10,
        l1: 8,
        l2: 6,
        pattern_rank: 2,
        noise_sigma: 0.5,
        seed: 11,
    })?;
    let devs = Deviations::from_dataset(&d)?;
    for lambda in [1e-2, 1.0, 1e2] {
        let fit = fit_pair(&devs, &CrpConfig::new(1, lambda), 0)?;
        println!(
            "λ = {lambda}: converged {} after {} iterations",
            fit.converged,
            fit.iterations()
        );
        for (i, f) in fit.trace.iter().enumerate().take(12) {
            println!("  {:>2}  {f:.10}", i + 1);
        }
    }
    Ok(())
}
