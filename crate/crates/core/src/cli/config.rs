//! Experiment configuration file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::decoder::{decoder_grid, DecoderParams, DecoderSpace};
use crate::encoder::{encoder_grid, EncoderSpace};
use crate::error::{Error, Result};
use crate::inferrer::{Architecture, TrainConfig};
use crate::pipeline::LearnSettings;
use crate::synth::{SplitFractions, SynthConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    pub width: usize,
    pub height: usize,
    pub blob_count_min: usize,
    pub blob_count_max: usize,
    pub blob_amplitude: f64,
    pub blob_radius: f64,
    pub min_separation: f64,
    pub noise_std: f64,
    pub n: usize,
    pub split: SplitFractions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecoderSection {
    pub sigmas: Vec<f64>,
    pub radius_multiplier: f64,
    #[serde(default)]
    pub include_careless: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InferrerSection {
    pub context_radius: usize,
    pub hidden_units: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_pixels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderSection {
    pub thresholds: Vec<f64>,
    pub separations: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsSection {
    pub tau: f64,
}

/// One experiment. All randomness derives from `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub synth: SynthSection,
    pub decoder: DecoderSection,
    pub inferrer: InferrerSection,
    pub encoder: EncoderSection,
    pub metrics: MetricsSection,
}

fn field(name: &str) -> impl FnOnce(Error) -> Error + '_ {
    move |e| match e {
        Error::Config(msg) => Error::Config(format!("{name}: {msg}")),
        other => other,
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
        let cfg: Self = serde_json::from_str(&text)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.synth_config().validate().map_err(field("synth"))?;
        if self.synth.n == 0 {
            return Err(Error::config("synth.n: must be at least 1"));
        }
        self.synth.split.validate().map_err(field("synth"))?;
        let (tr, va, te) = self.synth.split.sizes(self.synth.n);
        if tr == 0 || va == 0 || te == 0 {
            return Err(Error::config(format!(
                "synth.split: n = {} leaves an empty split",
                self.synth.n
            )));
        }
        self.decoder_space().map_err(field("decoder"))?;
        self.architecture().map_err(field("inferrer"))?;
        self.train_config().validate()?;
        self.encoder_space().map_err(field("encoder"))?;
        if !(self.metrics.tau > 0.0 && self.metrics.tau.is_finite()) {
            return Err(Error::config("metrics.tau: must be positive"));
        }
        Ok(())
    }

    pub fn synth_config(&self) -> SynthConfig {
        let s = &self.synth;
        SynthConfig {
            width: s.width,
            height: s.height,
            blob_count_min: s.blob_count_min,
            blob_count_max: s.blob_count_max,
            blob_amplitude: s.blob_amplitude,
            blob_radius: s.blob_radius,
            min_separation: s.min_separation,
            noise_std: s.noise_std,
            seed: self.seed,
        }
    }

    pub fn decoder_space(&self) -> Result<DecoderSpace> {
        let d = &self.decoder;
        decoder_grid(&d.sigmas, d.radius_multiplier, d.include_careless)
    }

    pub fn architecture(&self) -> Result<Architecture> {
        Architecture::new(self.inferrer.context_radius, self.inferrer.hidden_units)
    }

    pub fn train_config(&self) -> TrainConfig {
        let i = &self.inferrer;
        TrainConfig {
            epochs: i.epochs,
            learning_rate: i.learning_rate,
            batch_pixels: i.batch_pixels,
            seed: self.seed,
        }
    }

    pub fn encoder_space(&self) -> Result<EncoderSpace> {
        encoder_grid(&self.encoder.thresholds, &self.encoder.separations)
    }

    pub fn learn_settings(&self) -> Result<LearnSettings> {
        Ok(LearnSettings {
            arch: self.architecture()?,
            train: self.train_config(),
            encoder_space: self.encoder_space()?,
            tau: self.metrics.tau,
        })
    }

    /// Parses a `--decoder` override: `careless` or `careful:SIGMA`, the
    /// radius following the configured multiplier.
    pub fn parse_decoder(&self, spec: &str) -> Result<DecoderParams> {
        match spec.split_once(':') {
            None if spec == "careless" => Ok(DecoderParams::Careless),
            Some(("careful", sigma)) => {
                let sigma: f64 = sigma
                    .parse()
                    .map_err(|_| Error::config(format!("--decoder: bad sigma {sigma:?}")))?;
                DecoderParams::careful(sigma, self.decoder.radius_multiplier * sigma)
                    .map_err(field("--decoder"))
            }
            _ => Err(Error::config(format!(
                "--decoder: expected careless or careful:SIGMA, got {spec:?}"
            ))),
        }
    }

    pub fn default_data_dir(&self) -> PathBuf {
        self.output_dir.join("data")
    }

    pub fn default_run_dir(&self, command: &str) -> PathBuf {
        self.output_dir.join(command)
    }
}
