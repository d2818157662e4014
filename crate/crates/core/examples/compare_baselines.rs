//! CRP against LDA, 2DLDA and raw pixels on identical train/test splits.
//!
//!     cargo run --example compare_baselines

use crp::baselines::{fit_2dlda, fit_lda};
use crp::classify::{evaluate_protocol, RawPixels, SplitSpec};
use crp::crp::{fit_crp, CrpConfig};
use crp::dataio::{synth_dataset, SynthSpec};
use crp::stats::Dataset;

fn main() -> crp::error::Result<()> {
    let d = synth_dataset(&SynthSpec {
        classes: 4,
        per_class: 30,
        l1: 10,
        l2: 8,
        pattern_rank: 2,
        noise_sigma: 0.3,
        seed: 1,
    })?;
    let c = d.classes();
    let spec = SplitSpec::per_class(5, 5, 0);

    let results = [
        (
            "crp",
            evaluate_protocol(
                &d,
                &|t: &Dataset| fit_crp(t, &CrpConfig::for_classes(c, 1.0)),
                &spec,
            )?,
        ),
        (
            "lda",
            evaluate_protocol(&d, &|t: &Dataset| fit_lda(t, (c - 1).pow(2), None), &spec)?,
        ),
        (
            "2dlda",
            evaluate_protocol(
                &d,
                &|t: &Dataset| fit_2dlda(t, c - 1, c - 1, 10, None),
                &spec,
            )?,
        ),
        ("raw", evaluate_protocol(&d, &RawPixels, &spec)?),
    ];
    for (name, r) in results {
        println!("{name:<6} {:5.1} ± {:4.1}", 100.0 * r.mean, 100.0 * r.std);
    }
    Ok(())
}
