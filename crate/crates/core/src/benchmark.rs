//! The standard desk-scale benchmark: 64×64 lattices, 200/50/50 split,
//! 5–12 blobs, and the careful decoder grid σ ∈ {1, 2, 3}, radius 3σ.

use crate::decoder::{decoder_grid, DecoderSpace};
use crate::encoder::{encoder_grid, EncoderSpace};
use crate::error::Result;
use crate::inferrer::{Architecture, TrainConfig};
use crate::pipeline::LearnSettings;
use crate::synth::{SplitFractions, SynthConfig};

pub const SEED: u64 = 2024;
pub const SAMPLES: usize = 300;
pub const TAU: f64 = 3.0;

pub fn synth_config() -> SynthConfig {
    SynthConfig {
        width: 64,
        height: 64,
        blob_count_min: 5,
        blob_count_max: 12,
        blob_amplitude: 0.8,
        blob_radius: 4.0,
        min_separation: 6.0,
        noise_std: 0.05,
        seed: SEED,
    }
}

pub fn split_fractions() -> SplitFractions {
    SplitFractions::new(2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0)
}

pub fn architecture() -> Architecture {
    Architecture {
        context_radius: 4,
        hidden_units: 32,
    }
}

pub fn train_config() -> TrainConfig {
    TrainConfig {
        epochs: 30,
        learning_rate: 1e-2,
        batch_pixels: 4096,
        seed: SEED,
    }
}

pub fn encoder_space() -> Result<EncoderSpace> {
    encoder_grid(
        &[0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8],
        &[2.0, 3.0, 4.0, 5.0],
    )
}

pub fn careful_space() -> Result<DecoderSpace> {
    decoder_grid(&[1.0, 2.0, 3.0], 3.0, false)
}

pub fn learn_settings() -> Result<LearnSettings> {
    Ok(LearnSettings {
        arch: architecture(),
        train: train_config(),
        encoder_space: encoder_space()?,
        tau: TAU,
    })
}
