//! Stratified splits and 1-nearest-neighbour scoring, step by step.
//!
//!     cargo run --example evaluation_protocol

use crp::classify::{nn_accuracy, stratified_split, Embedder, RawPixels, SplitSpec};
use crp::crp::{fit_crp, CrpConfig};
use crp::dataio::{synth_dataset, SynthSpec};

fn main() -> crp::error::Result<()> {
    let d = synth_dataset(&SynthSpec {
        classes: 3,
        per_class: 15,
        l1: 8,
        l2: 8,
        pattern_rank: 1,
        noise_sigma: 0.4,
        seed: 3,
    })?;

    // Ten training samples per class; the split depends only on (seed, trial).
    let spec = SplitSpec::per_class(10, 3, 42);
    for trial in 0..spec.repetitions {
        let (train, test) = stratified_split(&d, &spec, trial)?;
        let model = fit_crp(&train, &CrpConfig::for_classes(d.classes(), 1.0))?;
        let crp_acc = nn_accuracy(&model.embed_dataset(&train)?, &model.embed_dataset(&test)?)?;
        let raw_acc = nn_accuracy(
            &RawPixels.embed_dataset(&train)?,
            &RawPixels.embed_dataset(&test)?,
        )?;
        println!(
            "trial {trial}: train {} / test {}  crp {:.3}  raw {:.3}",
            train.len(),
            test.len(),
            crp_acc,
            raw_acc
        );
    }
    Ok(())
}
