//! How later features see deflated inputs, and what changes when embedding
//! skips the replay.
//!
//!     cargo run --example deflation_replay

use crp::classify::{evaluate_protocol, SplitSpec};
use crp::crp::{deflate, fit_crp, fit_crp_observed, CrpConfig};
use crp::dataio::{synth_dataset, SynthSpec};
use crp::kronlin::frobenius_dot;
use crp::stats::Dataset;

fn main() -> crp::error::Result<()> {
    let d = synth_dataset(&SynthSpec {
        classes: 4,
        per_class: 20,
        l1: 8,
        l2: 8,
        pattern_rank: 2,
        noise_sigma: 0.4,
        seed: 5,
    })?;
    let cfg = CrpConfig::for_classes(d.classes(), 1.0);

    fit_crp_observed(&d, &cfg, |stage| {
        let dir = stage.fit.pair.direction();
        let worst = stage
            .deflated
            .samples()
            .iter()
            .map(|s| frobenius_dot(&dir, &s.data).abs())
            .fold(0.0, f64::max);
        println!(
            "pair {}: largest leftover component after deflation {worst:.1e}",
            stage.index
        );
    })?;

    // Directions of different pairs are not orthogonal in general.
    let model = fit_crp(&d, &cfg)?;
    let (a, b) = (model.pairs[0].direction(), model.pairs[1].direction());
    println!("<dir0, dir1> = {:.3e}", frobenius_dot(&a, &b));
    let once = deflate(&d, &model.pairs[0])?;
    let twice = deflate(&once, &model.pairs[0])?;
    let drift = once
        .samples()
        .iter()
        .zip(twice.samples())
        .map(|(a, b)| (&a.data - &b.data).norm())
        .fold(0.0, f64::max);
    println!("deflating twice by the same pair moves samples by at most {drift:.1e}");

    let spec = SplitSpec::per_class(8, 5, 0);
    for replay in [true, false] {
        let cfg = CrpConfig {
            replay,
            ..cfg.clone()
        };
        let r = evaluate_protocol(&d, &|t: &Dataset| fit_crp(t, &cfg), &spec)?;
        println!(
            "replay = {replay:<5}  accuracy {:.1} ± {:.1}",
            100.0 * r.mean,
            100.0 * r.std
        );
    }
    Ok(())
}
