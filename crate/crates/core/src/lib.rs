//! Learning point detectors from point annotations through a parameterized
//! target transformation.
//!
//! A solution has three parts:
//!
//! - a **decoder** ([`decoder`]) that turns ground-truth points into dense
//!   learnable target maps, either carelessly (one hot pixel per point) or
//!   carefully (a truncated Gaussian of tunable width);
//! - an **inferrer** ([`inferrer`]) that regresses target maps from images;
//! - an **encoder** ([`encoder`]) that turns predicted maps back into points.
//!
//! [`pipeline`] learns the inferrer and encoder under a fixed decoder, loops
//! over a grid of decoders to pick the best one, and tests the result.
//! [`synth`] supplies a seeded synthetic blob dataset and [`metrics`] the
//! `1 - F1` detection loss. [`cli`] wraps it all into file-backed commands.

pub mod benchmark;
pub mod cli;
pub mod container;
pub mod dataset_io;
pub mod decoder;
pub mod encoder;
pub mod error;
pub mod inferrer;
pub mod metrics;
pub mod pipeline;
pub mod rng;
pub mod synth;

pub use decoder::{decode_careful, decode_careless, decoder_grid, DecoderParams, DecoderSpace, TargetMap};
pub use encoder::{encode, encoder_grid, fit_encoder, EncoderParams, EncoderSpace};
pub use error::{Error, Result};
pub use inferrer::{infer, Architecture, InferrerParams, PredictedMap, TrainConfig};
pub use metrics::{detection_loss, match_points, report, DetectionReport};
pub use pipeline::{learn, loop_decoders, LearnSettings, LearnedSolution, LoopResult};
pub use synth::{generate_dataset, split, Dataset, ImageLattice, Point, PointSet, SplitFractions, SynthConfig};
