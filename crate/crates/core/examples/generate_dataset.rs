//! Generate a small synthetic blob dataset, split it, and write it to disk.
//!
//! cargo run --example generate_dataset -- [out_dir]

use msl::dataset_io::{load_dataset, save_dataset};
use msl::{generate_dataset, split, SplitFractions, SynthConfig};

fn main() -> msl::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "target/example_data".into());
    let cfg = SynthConfig {
        width: 32,
        height: 32,
        blob_count_min: 2,
        blob_count_max: 6,
        blob_amplitude: 0.8,
        blob_radius: 3.0,
        min_separation: 6.0,
        noise_std: 0.05,
        seed: 7,
    };
    let ds = generate_dataset(&cfg, 12)?;
    for (i, s) in ds.samples.iter().take(3).enumerate() {
        println!("sample {i}: {} blobs", s.truth.len());
    }
    let splits = split(&ds, SplitFractions::new(0.5, 0.25, 0.25), cfg.seed)?;
    println!("split {}/{}/{}", splits.train.len(), splits.val.len(), splits.test.len());

    save_dataset(std::path::Path::new(&out), &ds, &cfg)?;
    let (back, _) = load_dataset(std::path::Path::new(&out))?;
    assert_eq!(back.samples, ds.samples);
    println!("wrote and reloaded {} samples under {out}", back.len());
    Ok(())
}
