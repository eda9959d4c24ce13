use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::dataset_io::{load_dataset, read_json, save_dataset, write_json, MANIFEST};
use crate::decoder::DecoderParams;
use crate::encoder::{write_table_csv, EncoderParams};
use crate::error::{Error, Result};
use crate::inferrer::{load_model, save_model};
use crate::metrics::DetectionReport;
use crate::pipeline::{self, CandidateOutcome, CandidateResult, LoopResult};
use crate::synth::{generate_dataset, split, Splits};

pub const RESULTS: &str = "results.json";
pub const RUN_MANIFEST: &str = "manifest.json";
pub const TEST_REPORT: &str = "test_report.json";
pub const TABLE_CSV: &str = "table.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunKind {
    Learn,
    Loop,
}

/// One decoder candidate as recorded in `results.json`. Paths are relative
/// to the run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub index: usize,
    pub decoder: DecoderParams,
    pub seed: u64,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub validation_loss: Option<f64>,
    pub validation: Option<DetectionReport>,
    pub encoder: Option<EncoderParams>,
    pub final_train_loss: Option<f64>,
    pub model: Option<String>,
    pub encoder_table: Option<String>,
    pub trace: Option<String>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedSolution {
    pub index: usize,
    pub decoder: DecoderParams,
    pub model: String,
    pub encoder: EncoderParams,
    pub validation: DetectionReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResults {
    pub kind: RunKind,
    pub version: String,
    pub config: ExperimentConfig,
    pub candidates: Vec<CandidateRecord>,
    pub selected: SelectedSolution,
}

/// Bookkeeping that is allowed to differ between identical runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: ExperimentConfig,
    pub artifacts: Vec<String>,
    pub started_unix: u64,
    pub wall_seconds: f64,
}

fn now_unix() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(Error::io(dir))
}

/// `msl gen`: generate and write the dataset. Returns its directory.
pub fn cmd_gen(config_path: &Path, out: Option<&Path>) -> Result<PathBuf> {
    let started = Instant::now();
    let started_unix = now_unix();
    let cfg = ExperimentConfig::load(config_path)?;
    let dir = out.map(Path::to_path_buf).unwrap_or_else(|| cfg.default_data_dir());
    let synth = cfg.synth_config();
    let ds = generate_dataset(&synth, cfg.synth.n)?;
    let manifest = save_dataset(&dir, &ds, &synth)?;
    log::info!("wrote {} samples to {}", manifest.n, dir.display());

    let mut artifacts = vec![MANIFEST.to_string()];
    for s in &manifest.samples {
        artifacts.push(s.lattice.clone());
        artifacts.push(s.truth.clone());
    }
    write_json(
        &dir.join("gen_manifest.json"),
        &RunManifest {
            command: "gen".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config: cfg,
            artifacts,
            started_unix,
            wall_seconds: started.elapsed().as_secs_f64(),
        },
    )?;
    Ok(dir)
}

fn load_splits(cfg: &ExperimentConfig, data_dir: &Path) -> Result<Splits> {
    let (ds, manifest) = load_dataset(data_dir)?;
    if manifest.config != cfg.synth_config() || manifest.n != cfg.synth.n {
        log::warn!(
            "dataset at {} was generated from a different configuration",
            data_dir.display()
        );
    }
    split(&ds, cfg.synth.split, cfg.seed)
}

fn write_candidate(run_dir: &Path, c: &CandidateResult) -> Result<CandidateRecord> {
    let sub = format!("candidate_{:02}", c.index);
    let mut record = CandidateRecord {
        index: c.index,
        decoder: c.decoder,
        seed: c.seed,
        status: "failed".into(),
        error: None,
        validation_loss: None,
        validation: None,
        encoder: None,
        final_train_loss: None,
        model: None,
        encoder_table: None,
        trace: None,
        seconds: c.seconds,
    };
    let sol = match &c.outcome {
        CandidateOutcome::Failed(msg) => {
            record.error = Some(msg.clone());
            return Ok(record);
        }
        CandidateOutcome::Learned(sol) => sol,
    };
    let dir = run_dir.join(&sub);
    ensure_dir(&dir)?;
    save_model(&dir.join("model.json"), &dir.join("model.bin"), &sol.inferrer, &sol.train_config)?;
    write_json(&dir.join("encoder.json"), &sol.encoder)?;
    write_table_csv(&dir.join("encoder_table.csv"), &sol.encoder_table)?;

    let trace_path = dir.join("trace.csv");
    let mut w = csv::Writer::from_path(&trace_path)?;
    w.write_record(["epoch", "mean_loss"])?;
    for (e, l) in sol.trace.epoch_losses.iter().enumerate() {
        w.write_record([e.to_string(), l.to_string()])?;
    }
    w.flush().map_err(Error::io(&trace_path))?;

    record.status = "ok".into();
    record.validation_loss = Some(sol.validation.loss);
    record.validation = Some(sol.validation.clone());
    record.encoder = Some(sol.encoder);
    record.final_train_loss = sol.trace.epoch_losses.last().copied();
    record.model = Some(format!("{sub}/model.json"));
    record.encoder_table = Some(format!("{sub}/encoder_table.csv"));
    record.trace = Some(format!("{sub}/trace.csv"));
    Ok(record)
}

fn write_run(
    run_dir: &Path,
    kind: RunKind,
    cfg: &ExperimentConfig,
    result: &LoopResult,
    started: Instant,
    started_unix: u64,
) -> Result<RunResults> {
    ensure_dir(run_dir)?;
    let candidates = result
        .candidates
        .iter()
        .map(|c| write_candidate(run_dir, c))
        .collect::<Result<Vec<_>>>()?;
    let chosen = &candidates[result.selected];
    let sol = result.selected_solution();
    let selected = SelectedSolution {
        index: chosen.index,
        decoder: chosen.decoder,
        model: chosen.model.clone().expect("selected candidate has a model"),
        encoder: sol.encoder,
        validation: sol.validation.clone(),
    };
    let results = RunResults {
        kind,
        version: env!("CARGO_PKG_VERSION").into(),
        config: cfg.clone(),
        candidates,
        selected,
    };
    write_json(&run_dir.join(RESULTS), &results)?;

    let mut artifacts = vec![RESULTS.to_string()];
    for c in &results.candidates {
        for p in [&c.model, &c.encoder_table, &c.trace].into_iter().flatten() {
            artifacts.push(p.clone());
        }
        if let Some(m) = &c.model {
            let dir = Path::new(m).parent().unwrap_or(Path::new(""));
            artifacts.push(dir.join("model.bin").to_string_lossy().into_owned());
            artifacts.push(dir.join("encoder.json").to_string_lossy().into_owned());
        }
    }
    write_json(
        &run_dir.join(RUN_MANIFEST),
        &RunManifest {
            command: match kind {
                RunKind::Learn => "learn".into(),
                RunKind::Loop => "loop".into(),
            },
            version: env!("CARGO_PKG_VERSION").into(),
            config: cfg.clone(),
            artifacts,
            started_unix,
            wall_seconds: started.elapsed().as_secs_f64(),
        },
    )?;
    Ok(results)
}

/// `msl learn`: one learning pass under a single decoder (the override, or
/// the first candidate of the configured grid).
pub fn cmd_learn(
    config_path: &Path,
    data_dir: Option<&Path>,
    out: Option<&Path>,
    decoder: Option<&str>,
) -> Result<PathBuf> {
    let started = Instant::now();
    let started_unix = now_unix();
    let cfg = ExperimentConfig::load(config_path)?;
    let decoder = match decoder {
        Some(spec) => cfg.parse_decoder(spec)?,
        None => cfg.decoder_space()?.candidates()[0],
    };
    let data_dir = data_dir.map(Path::to_path_buf).unwrap_or_else(|| cfg.default_data_dir());
    let run_dir = out.map(Path::to_path_buf).unwrap_or_else(|| cfg.default_run_dir("learn"));
    let splits = load_splits(&cfg, &data_dir)?;
    let settings = cfg.learn_settings()?;

    let t0 = Instant::now();
    let solution = pipeline::learn(&splits.train, &splits.val, &decoder, &settings)?;
    let result = LoopResult {
        candidates: vec![CandidateResult {
            index: 0,
            decoder,
            seed: settings.train.seed,
            outcome: CandidateOutcome::Learned(Box::new(solution)),
            seconds: t0.elapsed().as_secs_f64(),
        }],
        selected: 0,
    };
    write_run(&run_dir, RunKind::Learn, &cfg, &result, started, started_unix)?;
    Ok(run_dir)
}

/// `msl loop`: learn under every decoder candidate and keep the best.
pub fn cmd_loop(config_path: &Path, data_dir: Option<&Path>, out: Option<&Path>, workers: usize) -> Result<PathBuf> {
    let started = Instant::now();
    let started_unix = now_unix();
    let cfg = ExperimentConfig::load(config_path)?;
    let data_dir = data_dir.map(Path::to_path_buf).unwrap_or_else(|| cfg.default_data_dir());
    let run_dir = out.map(Path::to_path_buf).unwrap_or_else(|| cfg.default_run_dir("loop"));
    let splits = load_splits(&cfg, &data_dir)?;
    let result = pipeline::loop_decoders(&splits, &cfg.decoder_space()?, &cfg.learn_settings()?, workers)?;
    write_run(&run_dir, RunKind::Loop, &cfg, &result, started, started_unix)?;
    Ok(run_dir)
}

pub fn load_results(run_dir: &Path) -> Result<RunResults> {
    read_json(&run_dir.join(RESULTS))
}

/// `msl test`: run the selected solution on the test split. The report is
/// written to `out`, or `test_report.json` in the run directory.
pub fn cmd_test(run_dir: &Path, data_dir: &Path, out: Option<&Path>) -> Result<(PathBuf, DetectionReport)> {
    let results = load_results(run_dir)?;
    let (inferrer, _) = load_model(&run_dir.join(&results.selected.model))?;
    let cfg = &results.config;
    let splits = load_splits(cfg, data_dir)?;
    let report = pipeline::test(&splits.test, &inferrer, &results.selected.encoder, cfg.metrics.tau)?;
    let path = out.map(Path::to_path_buf).unwrap_or_else(|| run_dir.join(TEST_REPORT));
    write_json(&path, &report)?;
    Ok((path, report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub index: usize,
    pub variant: String,
    pub sigma: Option<f64>,
    pub radius: Option<f64>,
    pub status: String,
    pub validation_loss: Option<f64>,
    pub validation_f1: Option<f64>,
    pub threshold: Option<f64>,
    pub min_separation: Option<f64>,
}

/// Candidate rows ordered by validation loss (failed rows last, ties by
/// candidate index). The selected candidate always comes first.
pub fn summary_rows(results: &RunResults) -> Vec<SummaryRow> {
    let mut rows: Vec<SummaryRow> = results
        .candidates
        .iter()
        .map(|c| {
            let (sigma, radius) = match c.decoder {
                DecoderParams::Careless => (None, None),
                DecoderParams::Careful { sigma, radius } => (Some(sigma), Some(radius)),
            };
            SummaryRow {
                index: c.index,
                variant: c.decoder.variant_name().into(),
                sigma,
                radius,
                status: c.status.clone(),
                validation_loss: c.validation_loss,
                validation_f1: c.validation.as_ref().map(|v| v.f1),
                threshold: c.encoder.map(|e| e.threshold),
                min_separation: c.encoder.map(|e| e.min_separation),
            }
        })
        .collect();
    rows.sort_by(|a, b| {
        let key = |r: &SummaryRow| r.validation_loss.unwrap_or(f64::INFINITY);
        key(a).total_cmp(&key(b)).then(a.index.cmp(&b.index))
    });
    rows
}

/// `msl report`: print the candidate table and write it as CSV. Returns the
/// printed text.
pub fn cmd_report(run_dir: &Path) -> Result<String> {
    let results = load_results(run_dir)?;
    let rows = summary_rows(&results);

    let csv_path = run_dir.join(TABLE_CSV);
    let mut w = csv::Writer::from_path(&csv_path)?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush().map_err(Error::io(&csv_path))?;

    let fmt = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into());
    let mut text = format!(
        "{} run, {} candidate(s), selected #{}\n",
        match results.kind {
            RunKind::Learn => "learn",
            RunKind::Loop => "loop",
        },
        rows.len(),
        results.selected.index
    );
    text.push_str(&format!(
        "{:>5}  {:<9} {:>7} {:>7}  {:<6} {:>9} {:>7} {:>9} {:>7}\n",
        "index", "variant", "sigma", "radius", "status", "val_loss", "val_f1", "threshold", "sep"
    ));
    for r in &rows {
        text.push_str(&format!(
            "{:>5}  {:<9} {:>7} {:>7}  {:<6} {:>9} {:>7} {:>9} {:>7}\n",
            r.index,
            r.variant,
            fmt(r.sigma),
            fmt(r.radius),
            r.status,
            fmt(r.validation_loss),
            fmt(r.validation_f1),
            fmt(r.threshold),
            fmt(r.min_separation),
        ));
    }
    let test_path = run_dir.join(TEST_REPORT);
    if test_path.exists() {
        let t: DetectionReport = read_json(&test_path)?;
        text.push_str(&format!(
            "test: precision {:.4} recall {:.4} f1 {:.4}\n",
            t.precision, t.recall, t.f1
        ));
    }
    Ok(text)
}
