use std::f64::consts::PI;

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::config::{RadarConfig, SubjectScenario};
use super::waveform::{BreathModel, SwayModel};
use crate::error::{Error, Result};
use crate::num::Real;

/// One radar frame: `chirps × samples` complex fast-time samples, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame<T> {
    chirps: usize,
    samples: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> Frame<T> {
    pub fn zeros(chirps: usize, samples: usize) -> Self {
        Self {
            chirps,
            samples,
            data: vec![Complex::new(T::zero(), T::zero()); chirps * samples],
        }
    }

    pub fn from_vec(chirps: usize, samples: usize, data: Vec<Complex<T>>) -> Result<Self> {
        if data.len() != chirps * samples {
            return Err(Error::InvalidInput(format!(
                "frame data length {} != {chirps} x {samples}",
                data.len()
            )));
        }
        Ok(Self { chirps, samples, data })
    }

    pub fn chirps(&self) -> usize {
        self.chirps
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn chirp(&self, i: usize) -> &[Complex<T>] {
        &self.data[i * self.samples..(i + 1) * self.samples]
    }

    pub fn data(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.data
    }
}

/// Ground truth attached to each frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthRecord {
    /// Instantaneous breathing rate, bpm.
    pub breath_rate_bpm: f64,
    /// Torso displacement (breathing plus sway) from the nominal distance, m.
    pub displacement_m: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence<T> {
    pub config: RadarConfig,
    pub frames: Vec<Frame<T>>,
    pub truth: Vec<TruthRecord>,
}

impl<T: Real> FrameSequence<T> {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frame_time_s(&self, index: usize) -> f64 {
        index as f64 / self.config.frame_rate_hz
    }

    /// Checks that every frame matches the radar dimensions and truth is aligned.
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let (c, s) = (self.config.chirps_per_frame, self.config.samples_per_chirp);
        if let Some((i, f)) = self
            .frames
            .iter()
            .enumerate()
            .find(|(_, f)| f.chirps != c || f.samples != s)
        {
            return Err(Error::InvalidInput(format!(
                "frame {i} is {}x{}, config expects {c}x{s}",
                f.chirps, f.samples
            )));
        }
        if self.truth.len() != self.frames.len() {
            return Err(Error::InvalidInput("truth length differs from frame count".into()));
        }
        Ok(())
    }
}

/// Seed offsets so breathing, sway and receiver noise draw independent streams.
const BREATH_SEED_SALT: u64 = 0x9E37_79B9_7F4A_7C15;
const SWAY_SEED_SALT: u64 = 0xC2B2_AE3D_27D4_EB4F;

/// Synthesizes FMCW beat frames for one standing subject.
///
/// Each chirp carries a single scatterer at `r(t) = distance + breath + sway`.
/// Fast-time sample `n` is `exp(j(4πr/λ + 2πν(n - (N-1)/2)))` with
/// `ν = 2Br / (cN)` cycles per sample, referenced to the chirp centre so the
/// phase of a fixed range bin follows `4πr/λ` at the centre wavelength.
pub fn synthesize_frames<T: Real>(config: &RadarConfig, scenario: &SubjectScenario) -> Result<FrameSequence<T>> {
    config.validate()?;
    scenario.validate(config)?;
    let n_frames = scenario.frame_count(config);
    let ns = config.samples_per_chirp;
    let nc = config.chirps_per_frame;
    let fs = config.frame_rate_hz;
    let k_phase = config.phase_per_metre();
    let cycles_per_metre = 1.0 / (config.range_resolution_m() * ns as f64);
    let centre = (ns as f64 - 1.0) / 2.0;

    let noise_sigma = if scenario.noise_snr_db.is_finite() {
        // Complex noise power σ² against a unit-amplitude tone, split over I and Q.
        (10f64.powf(-scenario.noise_snr_db / 10.0) / 2.0).sqrt()
    } else {
        0.0
    };

    let mut breath = BreathModel::new(
        scenario.breath_rate_bpm,
        scenario.breath_amp_m,
        scenario.breath_shape,
        scenario.breath_rate_jitter,
        scenario.breath_rate_corr_s,
        fs,
        scenario.seed ^ BREATH_SEED_SALT,
    );
    let mut sway = SwayModel::new(
        &scenario.sway_components,
        scenario.sway_random_walk_std_m,
        scenario.seed ^ SWAY_SEED_SALT,
        fs,
    );
    let mut noise_rng = ChaCha8Rng::seed_from_u64(scenario.seed);

    let mut frames = Vec::with_capacity(n_frames);
    let mut truth = Vec::with_capacity(n_frames);
    for _ in 0..n_frames {
        let (rate, d_breath) = breath.next_sample();
        let displacement = d_breath + sway.next_sample();
        let r = scenario.distance_m + displacement;
        let carrier_phase = k_phase * r;
        let nu = cycles_per_metre * r;

        let mut frame = Frame::<T>::zeros(nc, ns);
        for chirp in frame.data.chunks_exact_mut(ns) {
            for (n, s) in chirp.iter_mut().enumerate() {
                let ph = carrier_phase + 2.0 * PI * nu * (n as f64 - centre);
                let mut v = Complex::new(ph.cos(), ph.sin());
                if noise_sigma > 0.0 {
                    let i: f64 = StandardNormal.sample(&mut noise_rng);
                    let q: f64 = StandardNormal.sample(&mut noise_rng);
                    v += Complex::new(noise_sigma * i, noise_sigma * q);
                }
                *s = Complex::new(T::lit(v.re), T::lit(v.im));
            }
        }
        frames.push(frame);
        truth.push(TruthRecord {
            breath_rate_bpm: rate,
            displacement_m: displacement,
        });
    }
    Ok(FrameSequence {
        config: *config,
        frames,
        truth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthesis::config::SwayComponent;

    fn quiet(duration_s: f64) -> SubjectScenario {
        SubjectScenario {
            distance_m: 0.755,
            breath_amp_m: 0.0,
            noise_snr_db: f64::INFINITY,
            duration_s,
            ..Default::default()
        }
    }

    #[test]
    fn ten_seconds_is_two_hundred_frames() {
        let seq = synthesize_frames::<f32>(&RadarConfig::default(), &quiet(10.0)).unwrap();
        assert_eq!(seq.len(), 200);
        assert_eq!(seq.truth.len(), 200);
        seq.validate().unwrap();
        assert!(seq.frames.iter().all(|f| f.chirps() == 2 && f.samples() == 200));
    }

    #[test]
    fn zero_duration_is_empty() {
        let seq = synthesize_frames::<f64>(&RadarConfig::default(), &quiet(0.0)).unwrap();
        assert!(seq.is_empty());
    }

    #[test]
    fn identical_inputs_are_bit_identical() {
        let s = SubjectScenario {
            sway_components: vec![SwayComponent::new(0.2, 1e-3, 0.4)],
            sway_random_walk_std_m: 2e-5,
            breath_rate_jitter: 0.05,
            duration_s: 5.0,
            seed: 11,
            ..Default::default()
        };
        let a = synthesize_frames::<f32>(&RadarConfig::default(), &s).unwrap();
        let b = synthesize_frames::<f32>(&RadarConfig::default(), &s).unwrap();
        assert_eq!(a, b);
        let c = synthesize_frames::<f32>(&RadarConfig::default(), &SubjectScenario { seed: 12, ..s }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn constant_rate_truth_matches_scenario() {
        let s = SubjectScenario {
            breath_rate_bpm: 22.0,
            duration_s: 3.0,
            ..Default::default()
        };
        let seq = synthesize_frames::<f64>(&RadarConfig::default(), &s).unwrap();
        assert!(seq.truth.iter().all(|t| t.breath_rate_bpm == 22.0));
    }

    #[test]
    fn invalid_scenario_is_rejected() {
        let s = SubjectScenario {
            breath_rate_bpm: 60.0,
            ..Default::default()
        };
        assert!(matches!(
            synthesize_frames::<f64>(&RadarConfig::default(), &s),
            Err(Error::InvalidScenario(_))
        ));
    }
}
