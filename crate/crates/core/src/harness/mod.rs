//! Configuration, streaming pipeline, scoring and report output.

pub mod bench;
pub mod config;
pub mod ensemble;
pub mod evaluate;
pub mod figures;
pub mod pipeline;

pub use bench::{bench, BenchReport, LATENCY_BUDGET_MS};
pub use config::{Estimator, OutputPaths, RunConfig, ENV_PREFIX};
pub use ensemble::{
    evaluate_ensemble, regressor_corpus, run_ensemble, run_subject, EnsembleSpec, StandingProfile, SubjectRun,
};
pub use evaluate::{
    evaluate, histogram, EvaluationReport, GroundTruthSeries, HistogramBin, RateCategory, SubjectReport,
};
pub use figures::{emit_figure_data, write_histogram, write_spectrum_snapshot};
pub use pipeline::{
    load_model, read_jsonl, run_pipeline, run_pipeline_with, write_jsonl, EstimateRecord, Pipeline, PipelineRun,
    Recorder, StepEstimates,
};
