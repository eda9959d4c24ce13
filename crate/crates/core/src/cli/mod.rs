//! File-backed commands behind the `msl` binary: `gen`, `learn`, `loop`,
//! `test` and `report`.

mod commands;
mod config;

pub use commands::{
    cmd_gen, cmd_learn, cmd_loop, cmd_report, cmd_test, load_results, summary_rows, CandidateRecord, RunKind,
    RunManifest, RunResults, SelectedSolution, SummaryRow, RESULTS, RUN_MANIFEST, TABLE_CSV, TEST_REPORT,
};
pub use config::{DecoderSection, EncoderSection, ExperimentConfig, InferrerSection, MetricsSection, SynthSection};
