//! Synthetic standing-subject cohorts and batch evaluation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Estimator, RunConfig};
use super::evaluate::{evaluate, EvaluationReport, GroundTruthSeries};
use super::pipeline::{EstimateRecord, Pipeline, Recorder};
use crate::error::{Error, Result};
use crate::num::Real;
use crate::spectral::RegressorModel;
use crate::synthesis::config::RATE_BAND_BPM;
use crate::synthesis::{synthesize_frames, BreathShape, SubjectScenario, SwayComponent};

/// How a synthetic standing subject breathes and sways.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StandingProfile {
    pub distance_m: (f64, f64),
    pub breath_amp_m: (f64, f64),
    /// Standard deviation of the breathing-rate wander, bpm.
    pub breath_rate_jitter_bpm: f64,
    pub breath_rate_corr_s: f64,
    /// Chance of a raised-cosine (harmonic-rich) breath shape.
    pub raised_cosine_fraction: f64,
    pub sway_lines: usize,
    /// Sway line amplitude relative to the breath amplitude.
    pub sway_ratio: (f64, f64),
    pub sway_freq_hz: (f64, f64),
    /// Minimum spacing between a sway line and the breathing rate or another
    /// sway line, bpm.
    pub sway_clearance_bpm: f64,
    pub sway_random_walk_std_m: f64,
    pub noise_snr_db: f64,
}

impl Default for StandingProfile {
    fn default() -> Self {
        Self {
            distance_m: (1.0, 1.5),
            breath_amp_m: (1.5e-3, 3e-3),
            breath_rate_jitter_bpm: 1.5,
            breath_rate_corr_s: 15.0,
            raised_cosine_fraction: 0.5,
            sway_lines: 3,
            sway_ratio: (0.3, 0.7),
            sway_freq_hz: (0.1, 0.6),
            sway_clearance_bpm: 8.0,
            sway_random_walk_std_m: 2e-5,
            noise_snr_db: 25.0,
        }
    }
}

impl StandingProfile {
    /// Profile without any body sway.
    pub fn still() -> Self {
        Self {
            sway_lines: 0,
            sway_random_walk_std_m: 0.0,
            ..Self::default()
        }
    }

    /// Draws one subject breathing at `rate_bpm`.
    pub fn subject(&self, rate_bpm: f64, duration_s: f64, seed: u64) -> SubjectScenario {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let uniform = |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| if hi > lo { rng.random_range(lo..hi) } else { lo };
        let breath_amp_m = uniform(&mut rng, self.breath_amp_m);
        let breath_shape = if rng.random_bool(self.raised_cosine_fraction.clamp(0.0, 1.0)) {
            BreathShape::RaisedCosineInhale
        } else {
            BreathShape::Sinusoid
        };
        let mut sway_components = Vec::with_capacity(self.sway_lines);
        // Bounded so that an over-constrained layout yields fewer lines.
        for _ in 0..self.sway_lines * 200 {
            if sway_components.len() == self.sway_lines {
                break;
            }
            let f = uniform(&mut rng, self.sway_freq_hz);
            let ratio = uniform(&mut rng, self.sway_ratio);
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            // Rejection keeps sway lines off the breathing line and apart
            // from each other.
            let clear = |bpm: f64| (f * 60.0 - bpm).abs() >= self.sway_clearance_bpm;
            if !clear(rate_bpm) || !sway_components.iter().all(|c: &SwayComponent| clear(c.freq_hz * 60.0)) {
                continue;
            }
            sway_components.push(SwayComponent::new(f, ratio * breath_amp_m, phase));
        }
        SubjectScenario {
            distance_m: uniform(&mut rng, self.distance_m),
            breath_rate_bpm: rate_bpm,
            breath_amp_m,
            breath_shape,
            breath_rate_jitter: self.breath_rate_jitter_bpm / rate_bpm,
            breath_rate_corr_s: self.breath_rate_corr_s,
            sway_components,
            sway_random_walk_std_m: self.sway_random_walk_std_m,
            noise_snr_db: self.noise_snr_db,
            duration_s,
            seed: rng.random(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleSpec {
    pub subjects: usize,
    pub rate_range_bpm: (f64, f64),
    /// Estimates per subject after the first analysis window fills.
    pub samples_per_subject: usize,
    pub seed: u64,
    pub profile: StandingProfile,
}

impl Default for EnsembleSpec {
    fn default() -> Self {
        Self {
            subjects: 41,
            rate_range_bpm: RATE_BAND_BPM,
            samples_per_subject: 500,
            seed: 0,
            profile: StandingProfile::default(),
        }
    }
}

impl EnsembleSpec {
    /// Recording length giving exactly `samples_per_subject` estimates at hop 1.
    pub fn duration_s(&self, config: &RunConfig) -> f64 {
        let frames = config.window_frames() + self.samples_per_subject.saturating_sub(1) * config.hop_frames;
        frames as f64 / config.radar.frame_rate_hz
    }

    /// Stratified uniform rates: one draw in each of `subjects` equal slices
    /// of the range.
    pub fn rates(&self) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let (lo, hi) = self.rate_range_bpm;
        (0..self.subjects)
            .map(|i| lo + (hi - lo) * (i as f64 + rng.random::<f64>()) / self.subjects as f64)
            .collect()
    }

    pub fn scenarios(&self, config: &RunConfig) -> Vec<SubjectScenario> {
        let duration = self.duration_s(config);
        self.rates()
            .into_iter()
            .enumerate()
            .map(|(i, r)| {
                self.profile.subject(
                    r,
                    duration,
                    self.seed.wrapping_mul(1_000_003).wrapping_add(i as u64 + 1),
                )
            })
            .collect()
    }
}

/// Estimate streams of one subject for several estimators.
#[derive(Debug, Clone)]
pub struct SubjectRun {
    pub scenario: SubjectScenario,
    pub truth: GroundTruthSeries,
    pub streams: Vec<(Estimator, Vec<EstimateRecord>)>,
}

impl SubjectRun {
    pub fn stream(&self, estimator: Estimator) -> Option<&[EstimateRecord]> {
        self.streams
            .iter()
            .find(|(e, _)| *e == estimator)
            .map(|(_, r)| r.as_slice())
    }
}

pub fn run_subject<T: Real>(
    config: &RunConfig,
    scenario: &SubjectScenario,
    estimators: &[Estimator],
    model: Option<&RegressorModel<T>>,
) -> Result<SubjectRun> {
    let frames = synthesize_frames::<T>(&config.radar, scenario)?;
    let mut pipeline = Pipeline::new(config, &frames.config, model.cloned())?;
    let mut recorders: Vec<Recorder> = estimators.iter().map(|&e| Recorder::new(e)).collect();
    let mut streams: Vec<Vec<EstimateRecord>> = vec![Vec::new(); estimators.len()];
    for frame in &frames.frames {
        if let Some(step) = pipeline.push(frame)? {
            for (rec, out) in recorders.iter_mut().zip(&mut streams) {
                out.push(rec.record(&step));
            }
        }
    }
    Ok(SubjectRun {
        scenario: scenario.clone(),
        truth: GroundTruthSeries::from_truth(&frames.truth, frames.config.frame_rate_hz),
        streams: estimators.iter().copied().zip(streams).collect(),
    })
}

/// Runs every subject in parallel; results keep the scenario order.
pub fn run_ensemble<T: Real>(
    config: &RunConfig,
    scenarios: &[SubjectScenario],
    estimators: &[Estimator],
    model: Option<&RegressorModel<T>>,
) -> Result<Vec<SubjectRun>> {
    scenarios
        .par_iter()
        .map(|s| run_subject(config, s, estimators, model))
        .collect()
}

pub fn evaluate_ensemble(runs: &[SubjectRun], estimator: Estimator) -> Result<EvaluationReport> {
    let subjects = runs
        .iter()
        .enumerate()
        .map(|(i, run)| {
            let stream = run
                .stream(estimator)
                .ok_or_else(|| Error::Evaluation(format!("no {estimator} stream for subject {i}")))?;
            evaluate(&format!("subject-{i:02}"), stream, &run.truth)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvaluationReport::from_subjects(subjects))
}

/// Feature vectors and belt-smoothed true rates sampled every `stride`
/// analysis steps from each scenario.
pub fn regressor_corpus<T: Real>(
    config: &RunConfig,
    scenarios: &[SubjectScenario],
    stride: usize,
) -> Result<Vec<(Vec<T>, T)>> {
    let stride = stride.max(1);
    let per_subject: Vec<Vec<(Vec<T>, T)>> = scenarios
        .par_iter()
        .map(|s| -> Result<Vec<(Vec<T>, T)>> {
            let frames = synthesize_frames::<T>(&config.radar, s)?;
            let truth = GroundTruthSeries::from_truth(&frames.truth, frames.config.frame_rate_hz);
            let mut pipeline = Pipeline::new(config, &frames.config, None)?;
            let mut out = Vec::new();
            let mut n = 0usize;
            for frame in &frames.frames {
                if let Some(step) = pipeline.push(frame)? {
                    if n.is_multiple_of(stride) {
                        if let Some(t) = truth.at(step.t) {
                            out.push((step.features.values.to_vec(), T::lit(t)));
                        }
                    }
                    n += 1;
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(per_subject.into_iter().flatten().collect())
}
