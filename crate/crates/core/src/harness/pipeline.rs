//! Streaming estimator: one frame in, at most one estimate out.

use std::collections::VecDeque;
use std::time::{Duration, Instant};

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::config::{Estimator, RunConfig};
use crate::dsp::range::select_target_bin;
use crate::dsp::{angle, Bandpass, PhaseUnwrapper, RangeFft, RangeProfile, TargetBin};
use crate::error::{Error, Result};
use crate::num::Real;
use crate::spectral::{
    classical_estimate, cm_weighted, feature_vector, find_peaks, load_rrnn, power_peaks_weighted, power_weighted,
    regressor_forward, BreathSpectrum, FeatureVector, PeakSet, RegressorModel, SpectrumAnalyzer,
    DEFAULT_AVERAGED_PEAKS,
};
use crate::synthesis::{Frame, FrameSequence, RadarConfig};
use crate::tracking::{StepTrace, Tracker};

/// Every estimator's output for one analysis window.
#[derive(Debug, Clone, PartialEq)]
pub struct StepEstimates<T> {
    pub frame_index: usize,
    pub t: f64,
    pub peaks: PeakSet<T>,
    pub features: FeatureVector<T>,
    pub classical: Option<T>,
    pub cm_weighted: Option<T>,
    pub power_weighted: Option<T>,
    pub power_peaks_weighted: Option<T>,
    pub regressor: Option<T>,
    pub track: StepTrace<T>,
}

impl<T: Real> StepEstimates<T> {
    pub fn value(&self, estimator: Estimator) -> Option<T> {
        match estimator {
            Estimator::Classical => self.classical,
            Estimator::CmWeighted => self.cm_weighted,
            Estimator::PowerWeighted => self.power_weighted,
            Estimator::PowerPeaksWeighted => self.power_peaks_weighted,
            Estimator::Regressor => self.regressor,
            Estimator::AdaptiveKalman => (!self.track.stale).then_some(self.track.rate_bpm),
        }
    }
}

/// One line of the JSON-lines estimate stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    /// Time of the newest frame in the window, seconds from the first frame.
    pub t: f64,
    pub bpm: Option<f64>,
    /// Confidence of the peak behind the estimate; `null` when unavailable
    /// or unbounded.
    pub cm: Option<f64>,
    /// Measurement variance used by the tracker (adaptive estimator only).
    pub r: Option<f64>,
    /// No fresh estimate this step; `bpm` repeats the previous one.
    pub stale: bool,
}

/// Turns per-step estimates into records for one estimator, carrying the
/// last value forward through steps without an estimate.
#[derive(Debug, Clone)]
pub struct Recorder {
    pub estimator: Estimator,
    last: Option<f64>,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

impl Recorder {
    pub fn new(estimator: Estimator) -> Self {
        Self { estimator, last: None }
    }

    pub fn record<T: Real>(&mut self, step: &StepEstimates<T>) -> EstimateRecord {
        let fresh = step.value(self.estimator).map(|v| v.to_f64_lossy());
        if fresh.is_some() {
            self.last = fresh;
        }
        let (cm, r) = match self.estimator {
            Estimator::AdaptiveKalman => (
                step.track.cm_max.map(|c| c.to_f64_lossy()),
                step.track.r.map(|r| r.to_f64_lossy()),
            ),
            _ => (step.peaks.peaks.first().map(|p| p.cm.to_f64_lossy()), None),
        };
        EstimateRecord {
            t: step.t,
            bpm: self.last,
            cm: cm.and_then(finite),
            r,
            stale: fresh.is_none(),
        }
    }
}

/// Streaming pipeline for one subject.
///
/// The range bin is fixed from the first full analysis window; every later
/// estimate uses only frames already seen.
pub struct Pipeline<T: Real> {
    radar: RadarConfig,
    window_frames: usize,
    hop: usize,
    peak_count: usize,
    search_range_m: (f64, f64),
    range: RangeFft<T>,
    warmup: Vec<RangeProfile<T>>,
    target: Option<TargetBin<T>>,
    last_wrapped: T,
    unwrapper: PhaseUnwrapper<T>,
    phase: VecDeque<T>,
    bandpass: Bandpass<T>,
    analyzer: SpectrumAnalyzer<T>,
    tracker: Tracker<T>,
    model: Option<RegressorModel<T>>,
    frames_seen: usize,
    last_spectrum: Option<BreathSpectrum<T>>,
}

impl<T: Real> Pipeline<T> {
    pub fn new(config: &RunConfig, radar: &RadarConfig, model: Option<RegressorModel<T>>) -> Result<Self> {
        let mut cfg = config.clone();
        cfg.radar = *radar;
        cfg.validate_processing()?;
        if config.estimator == Estimator::Regressor && model.is_none() {
            return Err(Error::Config("estimator 'regressor' needs a loaded model".into()));
        }
        if let Some(m) = &model {
            m.validate()?;
        }
        let window_frames = cfg.window_frames();
        let bandpass = Bandpass::design(&cfg.bandpass, radar.frame_rate_hz)?;
        if window_frames < bandpass.min_len() {
            return Err(Error::Config(format!(
                "analysis window of {window_frames} frames shorter than the filter needs ({})",
                bandpass.min_len()
            )));
        }
        Ok(Self {
            radar: *radar,
            window_frames,
            hop: cfg.hop_frames,
            peak_count: cfg.peak_count,
            search_range_m: cfg.search_range_m,
            range: RangeFft::new(radar, cfg.range_window, radar.fast_fft_len())?,
            warmup: Vec::with_capacity(window_frames),
            target: None,
            last_wrapped: T::zero(),
            unwrapper: PhaseUnwrapper::new(),
            phase: VecDeque::with_capacity(window_frames + 1),
            bandpass,
            analyzer: SpectrumAnalyzer::new(cfg.spectrum_fft_len)?,
            tracker: Tracker::new(cfg.track),
            model,
            frames_seen: 0,
            last_spectrum: None,
        })
    }

    pub fn target(&self) -> Option<&TargetBin<T>> {
        self.target.as_ref()
    }

    pub fn window_frames(&self) -> usize {
        self.window_frames
    }

    /// Spectrum of the most recent analysis window.
    pub fn last_spectrum(&self) -> Option<&BreathSpectrum<T>> {
        self.last_spectrum.as_ref()
    }

    fn push_phase(&mut self, c: Complex<T>) {
        if !(c.re == T::zero() && c.im == T::zero()) {
            self.last_wrapped = angle(c);
        }
        let u = self.unwrapper.push(self.last_wrapped);
        self.phase.push_back(u);
        if self.phase.len() > self.window_frames {
            self.phase.pop_front();
        }
    }

    pub fn push(&mut self, frame: &Frame<T>) -> Result<Option<StepEstimates<T>>> {
        let index = self.frames_seen;
        let profile = self.range.process(frame, index)?;
        self.frames_seen += 1;
        match self.target {
            None => {
                self.warmup.push(profile);
                if self.warmup.len() < self.window_frames {
                    return Ok(None);
                }
                let (lo, hi) = self.search_range_m;
                let target = select_target_bin(&self.warmup, (T::lit(lo), T::lit(hi)))?;
                let warmup = std::mem::take(&mut self.warmup);
                for p in &warmup {
                    self.push_phase(p.bins[target.bin]);
                }
                self.target = Some(target);
            }
            Some(t) => self.push_phase(profile.bins[t.bin]),
        }
        if !(index + 1 - self.window_frames).is_multiple_of(self.hop) {
            return Ok(None);
        }
        self.analyze(index).map(Some)
    }

    fn analyze(&mut self, index: usize) -> Result<StepEstimates<T>> {
        let window: Vec<T> = self.phase.iter().copied().collect();
        let filtered = self.bandpass.apply(&window)?;
        let signal = crate::dsp::PhaseSignal::new(
            filtered,
            T::lit(self.radar.frame_rate_hz),
            self.target.map_or(0, |t| t.bin),
        );
        let spectrum = self.analyzer.analyze(&signal)?;
        let peaks = find_peaks(&spectrum, self.peak_count);
        let features = feature_vector(&peaks, &spectrum);
        let regressor = match &self.model {
            Some(m) => Some(regressor_forward(m, &features.values)?),
            None => None,
        };
        let track = self.tracker.step(&peaks);
        let step = StepEstimates {
            frame_index: index,
            t: index as f64 / self.radar.frame_rate_hz,
            classical: classical_estimate(&peaks).ok(),
            cm_weighted: cm_weighted(&peaks, DEFAULT_AVERAGED_PEAKS).ok(),
            power_weighted: power_weighted(&spectrum).ok(),
            power_peaks_weighted: power_peaks_weighted(&peaks, DEFAULT_AVERAGED_PEAKS).ok(),
            regressor,
            track,
            features,
            peaks,
        };
        self.last_spectrum = Some(spectrum);
        Ok(step)
    }
}

/// Output of a complete run over one recording.
#[derive(Debug, Clone)]
pub struct PipelineRun<T> {
    pub records: Vec<EstimateRecord>,
    pub traces: Vec<StepTrace<T>>,
    /// Wall-clock processing time of every frame that produced an estimate.
    pub latencies: Vec<Duration>,
    pub target: Option<TargetBin<T>>,
    /// Last analysis window's spectrum and peaks.
    pub snapshot: Option<(BreathSpectrum<T>, PeakSet<T>)>,
}

/// Loads the regressor named by the configuration, if any.
pub fn load_model<T: Real>(config: &RunConfig) -> Result<Option<RegressorModel<T>>> {
    config.regressor_model.as_deref().map(load_rrnn).transpose()
}

pub fn run_pipeline<T: Real>(config: &RunConfig, frames: &FrameSequence<T>) -> Result<PipelineRun<T>> {
    run_pipeline_with(config, frames, load_model(config)?)
}

pub fn run_pipeline_with<T: Real>(
    config: &RunConfig,
    frames: &FrameSequence<T>,
    model: Option<RegressorModel<T>>,
) -> Result<PipelineRun<T>> {
    frames.validate()?;
    if frames.config != config.radar {
        return Err(Error::Config(
            "recording radar parameters differ from the run configuration".into(),
        ));
    }
    let mut pipeline = Pipeline::new(config, &frames.config, model)?;
    let mut recorder = Recorder::new(config.estimator);
    let mut run = PipelineRun {
        records: Vec::new(),
        traces: Vec::new(),
        latencies: Vec::new(),
        target: None,
        snapshot: None,
    };
    let mut last_peaks = None;
    for frame in &frames.frames {
        let start = Instant::now();
        let step = pipeline.push(frame)?;
        let elapsed = start.elapsed();
        if let Some(step) = step {
            run.latencies.push(elapsed);
            run.records.push(recorder.record(&step));
            run.traces.push(step.track);
            last_peaks = Some(step.peaks);
        }
    }
    run.target = pipeline.target().copied();
    run.snapshot = pipeline.last_spectrum.take().zip(last_peaks);
    Ok(run)
}

/// Serializes records as JSON lines.
pub fn write_jsonl<W: std::io::Write>(records: &[EstimateRecord], mut out: W) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_jsonl<R: std::io::BufRead>(input: R) -> Result<Vec<EstimateRecord>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|e| Error::InvalidInput(format!("estimate line {}: {e}", i + 1)))?,
        );
    }
    Ok(out)
}
