//! Matrix CSV round trip, a PGM class directory and block downsampling.
//!
//!     cargo run --example dataset_io

use std::fs;

use crp::dataio::{
    block_downsample, load_matrix_csv, load_pgm_dir, synth_dataset, write_matrix_csv, SynthSpec,
};

fn main() -> crp::error::Result<()> {
    let dir = tempfile::tempdir().map_err(|e| crp::error::CrpError::io("tempdir", e))?;

    let d = synth_dataset(&SynthSpec {
        classes: 2,
        per_class: 3,
        l1: 4,
        l2: 4,
        pattern_rank: 1,
        noise_sigma: 0.1,
        seed: 0,
    })?;
    let csv = dir.path().join("data.csv");
    write_matrix_csv(&d, &csv)?;
    let back = load_matrix_csv(&csv)?;
    println!("csv round trip exact: {}", back == d);
    println!(
        "first line of the file: {}",
        fs::read_to_string(&csv).unwrap().lines().nth(1).unwrap()
    );

    // Two classes, one 4x4 binary PGM each.
    for (class, level) in [("cat", 255u8), ("dog", 51)] {
        let class_dir = dir.path().join("images").join(class);
        fs::create_dir_all(&class_dir).unwrap();
        let mut bytes = b"P5\n4 4\n255\n".to_vec();
        bytes.extend((0..16).map(|i| if i % 2 == 0 { level } else { 0 }));
        fs::write(class_dir.join("0.pgm"), bytes).unwrap();
    }
    let images = load_pgm_dir(dir.path().join("images"))?;
    for s in images.samples() {
        println!("label {} →{}", s.label, s.data);
        println!("2x2 block means →{}", block_downsample(&s.data, 2, 2)?);
    }
    Ok(())
}
