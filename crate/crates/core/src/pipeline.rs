//! The three procedures: learning under a fixed decoder, looping over the
//! decoder space, and testing a finished solution.

use std::time::Instant;

use rayon::prelude::*;

use crate::decoder::{decode, DecoderParams, DecoderSpace, TargetMap};
use crate::encoder::{encode, fit_encoder, EncoderParams, EncoderRow, EncoderSpace};
use crate::error::{Error, Result};
use crate::inferrer::{infer, train, Architecture, InferrerParams, PredictedMap, TrainConfig, TrainTrace};
use crate::metrics::{report, DetectionReport};
use crate::rng::{sub_seed, STREAM_CANDIDATE};
use crate::synth::{Dataset, Splits};

/// Everything `learn` needs besides the data and the decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnSettings {
    pub arch: Architecture,
    pub train: TrainConfig,
    pub encoder_space: EncoderSpace,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnedSolution {
    pub decoder: DecoderParams,
    pub inferrer: InferrerParams,
    pub encoder: EncoderParams,
    pub train_config: TrainConfig,
    pub trace: TrainTrace,
    pub encoder_table: Vec<EncoderRow>,
    pub validation: DetectionReport,
}

impl LearnedSolution {
    pub fn test(&self, ds: &Dataset, tau: f64) -> Result<DetectionReport> {
        test(ds, &self.inferrer, &self.encoder, tau)
    }
}

/// Learnable targets for every sample of `ds`.
pub fn decode_targets(ds: &Dataset, decoder: &DecoderParams) -> Result<Vec<TargetMap>> {
    ds.samples
        .iter()
        .map(|s| decode(&s.truth, s.lattice.shape(), decoder))
        .collect()
}

pub fn infer_all(ds: &Dataset, params: &InferrerParams) -> Vec<PredictedMap> {
    ds.samples.iter().map(|s| infer(&s.lattice, params)).collect()
}

/// Decode the training truth, train the inferrer on it, then fit the encoder
/// on the validation split's predicted maps.
pub fn learn(
    train_set: &Dataset,
    val_set: &Dataset,
    decoder: &DecoderParams,
    settings: &LearnSettings,
) -> Result<LearnedSolution> {
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::config("learn needs non-empty train and validation splits"));
    }
    let targets = decode_targets(train_set, decoder)?;
    let lattices: Vec<_> = train_set.samples.iter().map(|s| s.lattice.clone()).collect();
    let (inferrer, trace) = train(&lattices, &targets, settings.arch, &settings.train)?;

    let maps = infer_all(val_set, &inferrer);
    let truths = val_set.truths();
    let (encoder, encoder_table) = fit_encoder(&maps, &truths, &settings.encoder_space, settings.tau)?;
    let predicted: Vec<_> = maps.iter().map(|m| encode(m, &encoder)).collect();
    let validation = report(&predicted, &truths, settings.tau)?;
    log::info!("{decoder}: validation F1 {:.4} with {encoder:?}", validation.f1);

    Ok(LearnedSolution {
        decoder: *decoder,
        inferrer,
        encoder,
        train_config: settings.train.clone(),
        trace,
        encoder_table,
        validation,
    })
}

/// Infer then encode every sample; no decoder involvement.
pub fn test(ds: &Dataset, inferrer: &InferrerParams, encoder: &EncoderParams, tau: f64) -> Result<DetectionReport> {
    let predicted: Vec<_> = ds
        .samples
        .iter()
        .map(|s| encode(&infer(&s.lattice, inferrer), encoder))
        .collect();
    report(&predicted, &ds.truths(), tau)
}

#[derive(Debug, Clone, PartialEq)]
pub enum CandidateOutcome {
    Learned(Box<LearnedSolution>),
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateResult {
    pub index: usize,
    pub decoder: DecoderParams,
    pub seed: u64,
    pub outcome: CandidateOutcome,
    pub seconds: f64,
}

impl CandidateResult {
    pub fn validation_loss(&self) -> Option<f64> {
        match &self.outcome {
            CandidateOutcome::Learned(s) => Some(s.validation.loss),
            CandidateOutcome::Failed(_) => None,
        }
    }

    pub fn solution(&self) -> Option<&LearnedSolution> {
        match &self.outcome {
            CandidateOutcome::Learned(s) => Some(s),
            CandidateOutcome::Failed(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopResult {
    pub candidates: Vec<CandidateResult>,
    pub selected: usize,
}

impl LoopResult {
    pub fn selected_candidate(&self) -> &CandidateResult {
        &self.candidates[self.selected]
    }

    pub fn selected_solution(&self) -> &LearnedSolution {
        self.selected_candidate()
            .solution()
            .expect("selected candidate always has a solution")
    }
}

/// Training seed of decoder candidate `index`.
pub fn candidate_seed(base: u64, index: usize) -> u64 {
    sub_seed(base ^ STREAM_CANDIDATE, index as u64)
}

/// Index of the smallest loss, earliest on ties; `None` entries are skipped.
pub fn argmin_first(losses: &[Option<f64>]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, l) in losses.iter().enumerate() {
        if let Some(l) = *l {
            if best.is_none_or(|(_, b)| l < b) {
                best = Some((i, l));
            }
        }
    }
    best.map(|(i, _)| i)
}

/// Runs `learn` for every decoder candidate on `workers` threads and
/// selects the lowest validation loss. Failed candidates are kept in the
/// table and skipped by the selection.
pub fn loop_decoders(
    splits: &Splits,
    space: &DecoderSpace,
    settings: &LearnSettings,
    workers: usize,
) -> Result<LoopResult> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::config(format!("worker pool: {e}")))?;

    let candidates: Vec<CandidateResult> = pool.install(|| {
        space
            .candidates()
            .par_iter()
            .enumerate()
            .map(|(index, decoder)| {
                let seed = candidate_seed(settings.train.seed, index);
                let mut local = settings.clone();
                local.train.seed = seed;
                let started = Instant::now();
                let outcome = match learn(&splits.train, &splits.val, decoder, &local) {
                    Ok(s) => CandidateOutcome::Learned(Box::new(s)),
                    Err(e) => {
                        log::warn!("candidate {index} ({decoder}) failed: {e}");
                        CandidateOutcome::Failed(e.to_string())
                    }
                };
                CandidateResult {
                    index,
                    decoder: *decoder,
                    seed,
                    outcome,
                    seconds: started.elapsed().as_secs_f64(),
                }
            })
            .collect()
    });

    let losses: Vec<Option<f64>> = candidates.iter().map(|c| c.validation_loss()).collect();
    let selected = argmin_first(&losses).ok_or(Error::AllCandidatesFailed(candidates.len()))?;
    Ok(LoopResult {
        candidates,
        selected,
    })
}
