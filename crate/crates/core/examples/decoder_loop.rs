//! Loop over a small decoder grid and report each candidate.
//!
//! cargo run --release --example decoder_loop -- [workers]

use msl::pipeline::{loop_decoders, LearnSettings};
use msl::{decoder_grid, encoder_grid, generate_dataset, split, Architecture, SplitFractions, SynthConfig, TrainConfig};

fn main() -> msl::Result<()> {
    let workers = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2);
    let cfg = SynthConfig {
        width: 24,
        height: 24,
        blob_count_min: 2,
        blob_count_max: 5,
        blob_amplitude: 0.8,
        blob_radius: 3.0,
        min_separation: 6.0,
        noise_std: 0.05,
        seed: 5,
    };
    let ds = generate_dataset(&cfg, 30)?;
    let splits = split(&ds, SplitFractions::new(0.6, 0.2, 0.2), cfg.seed)?;
    let settings = LearnSettings {
        arch: Architecture::new(2, 8)?,
        train: TrainConfig {
            epochs: 8,
            learning_rate: 0.03,
            batch_pixels: 512,
            seed: cfg.seed,
        },
        encoder_space: encoder_grid(&[0.2, 0.3, 0.4, 0.5], &[2.0, 3.0])?,
        tau: 3.0,
    };
    let space = decoder_grid(&[0.5, 1.0, 2.0, 3.0], 3.0, true)?;
    let res = loop_decoders(&splits, &space, &settings, workers)?;
    for c in &res.candidates {
        let mark = if c.index == res.selected { "*" } else { " " };
        println!("{mark} #{} {:<28} val loss {:?}", c.index, c.decoder.to_string(), c.validation_loss());
    }
    let best = res.selected_solution();
    println!("test F1 {:.3}", best.test(&splits.test, settings.tau)?.f1);
    Ok(())
}
