//! Per-sample latency against the real-time budget.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::pipeline::run_pipeline_with;
use crate::error::{Error, Result};
use crate::num::Real;
use crate::spectral::RegressorModel;
use crate::synthesis::FrameSequence;

/// One estimate every 1/17 s.
pub const LATENCY_BUDGET_MS: f64 = 1000.0 / 17.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub samples: usize,
    pub mean_ms: f64,
    pub p99_ms: f64,
    pub max_ms: f64,
    pub budget_ms: f64,
    pub within_budget: bool,
}

impl BenchReport {
    pub fn from_latencies(latencies: &[Duration]) -> Result<Self> {
        if latencies.is_empty() {
            return Err(Error::InsufficientData { needed: 1, got: 0 });
        }
        let mut ms: Vec<f64> = latencies.iter().map(|d| d.as_secs_f64() * 1e3).collect();
        ms.sort_by(f64::total_cmp);
        let mean = ms.iter().sum::<f64>() / ms.len() as f64;
        // nearest-rank percentile
        let rank = ((0.99 * ms.len() as f64).ceil() as usize).clamp(1, ms.len());
        Ok(Self {
            samples: ms.len(),
            mean_ms: mean,
            p99_ms: ms[rank - 1],
            max_ms: *ms.last().unwrap(),
            budget_ms: LATENCY_BUDGET_MS,
            within_budget: mean < LATENCY_BUDGET_MS,
        })
    }
}

/// Runs the pipeline over `frames` and summarizes its per-estimate latency.
pub fn bench<T: Real>(
    config: &RunConfig,
    frames: &FrameSequence<T>,
    model: Option<RegressorModel<T>>,
) -> Result<BenchReport> {
    let run = run_pipeline_with(config, frames, model)?;
    BenchReport::from_latencies(&run.latencies)
}
