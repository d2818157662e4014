//! Fit a compound rank-k projection, inspect the per-pair convergence, embed
//! samples and save the model.
//!
//!     cargo run --example fit_crp

use crp::crp::{fit_crp, CrpConfig};
use crp::dataio::{synth_dataset, SynthSpec};
use crp::model::SavedModel;

fn main() -> crp::error::Result<()> {
    let d = synth_dataset(&SynthSpec {
        classes: 3,
        per_class: 20,
        l1: 12,
        l2: 10,
        pattern_rank: 2,
        noise_sigma: 0.3,
        seed: 7,
    })?;

    // h = (c-1)^2 = 4 pairs of rank 2, λ = 1
    let cfg = CrpConfig::for_classes(d.classes(), 1.0);
    let model = fit_crp(&d, &cfg)?;
    for (p, trace) in model.objective_traces.iter().enumerate() {
        println!(
            "pair {p}: {:>2} iterations, objective {:.5}, converged {}, constraint residual {:.1e}",
            trace.len(),
            trace.last().unwrap(),
            model.converged[p],
            model.pairs[p].constraint_residual()
        );
    }

    let x = &d.samples()[0];
    println!(
        "embedding of a class-{} sample: {:?}",
        x.label,
        model.embed(&x.data)?.as_slice()
    );

    let path = std::env::temp_dir().join("crp_example_model.json");
    SavedModel::Crp(model).save(&path)?;
    println!("model written to {}", path.display());
    Ok(())
}
