//! Full benchmark: loop over the careful decoder grid, then train the
//! careless decoder under the same budget, and compare test F1.
//!
//! cargo run --release --example careful_vs_careless -- [workers]

use std::time::Instant;

use msl::pipeline::{learn, loop_decoders};
use msl::{benchmark, generate_dataset, split, DecoderParams};

fn main() -> msl::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MSL_LOG", "info")).init();
    let workers = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);

    let ds = generate_dataset(&benchmark::synth_config(), benchmark::SAMPLES)?;
    let splits = split(&ds, benchmark::split_fractions(), benchmark::SEED)?;
    let settings = benchmark::learn_settings()?;

    let started = Instant::now();
    let looped = loop_decoders(&splits, &benchmark::careful_space()?, &settings, workers)?;
    println!("loop took {:.1}s", started.elapsed().as_secs_f64());
    for c in &looped.candidates {
        println!(
            "  #{} {:<32} val loss {:?}  ({:.1}s)",
            c.index,
            c.decoder.to_string(),
            c.validation_loss(),
            c.seconds
        );
    }
    let best = looped.selected_solution();
    let careful_test = best.test(&splits.test, settings.tau)?;
    println!(
        "selected {}: val F1 {:.4}, test F1 {:.4}",
        best.decoder, best.validation.f1, careful_test.f1
    );

    let started = Instant::now();
    let careless = learn(&splits.train, &splits.val, &DecoderParams::Careless, &settings)?;
    let careless_test = careless.test(&splits.test, settings.tau)?;
    println!(
        "careless ({:.1}s): val F1 {:.4}, test F1 {:.4}, encoder {:?}",
        started.elapsed().as_secs_f64(),
        careless.validation.f1,
        careless_test.f1,
        careless.encoder
    );
    Ok(())
}
