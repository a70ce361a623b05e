//! Radar parametrization and subject scenario.
//!
//! The radar defaults follow the 60–64 GHz module this chain was built for.
//! All subject magnitudes (breathing depth, sway amplitudes, jitter) are
//! modelling choices: nothing here was measured on people.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::SPEED_OF_LIGHT;

/// Lowest and highest respiratory rate the chain is expected to detect, bpm.
pub const RATE_BAND_BPM: (f64, f64) = (6.0, 50.0);
/// Band of body-balancing micro-motion, Hz.
pub const SWAY_BAND_HZ: (f64, f64) = (0.05, 1.0);
/// Distances a subject may stand at, metres.
pub const DISTANCE_RANGE_M: (f64, f64) = (0.5, 2.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadarConfig {
    pub carrier_start_hz: f64,
    pub carrier_stop_hz: f64,
    pub bandwidth_hz: f64,
    pub chirp_duration_s: f64,
    pub samples_per_chirp: usize,
    pub chirps_per_frame: usize,
    /// Slow-time rate. 20 Hz puts a 1024-point breath spectrum on a
    /// 1.171875 bpm grid; the embedded target ran at roughly 17 Hz.
    pub frame_rate_hz: f64,
}

impl Default for RadarConfig {
    fn default() -> Self {
        Self {
            carrier_start_hz: 60e9,
            carrier_stop_hz: 64e9,
            bandwidth_hz: 3.7e9,
            chirp_duration_s: 57e-6,
            samples_per_chirp: 200,
            chirps_per_frame: 2,
            frame_rate_hz: 20.0,
        }
    }
}

impl RadarConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidScenario(m.to_owned()));
        let all_finite = [
            self.carrier_start_hz,
            self.carrier_stop_hz,
            self.bandwidth_hz,
            self.chirp_duration_s,
            self.frame_rate_hz,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !all_finite {
            return bad("radar parameters must be finite");
        }
        if self.carrier_start_hz <= 0.0 || self.carrier_stop_hz <= self.carrier_start_hz {
            return bad("carrier_stop_hz must exceed carrier_start_hz > 0");
        }
        if self.bandwidth_hz <= 0.0 || self.bandwidth_hz > self.carrier_stop_hz - self.carrier_start_hz {
            return bad("bandwidth_hz must be positive and fit inside the carrier span");
        }
        if self.chirp_duration_s <= 0.0 {
            return bad("chirp_duration_s must be positive");
        }
        if self.samples_per_chirp < 2 {
            return bad("samples_per_chirp must be at least 2");
        }
        if self.chirps_per_frame < 1 {
            return bad("chirps_per_frame must be at least 1");
        }
        if self.frame_rate_hz <= 0.0 {
            return bad("frame_rate_hz must be positive");
        }
        Ok(())
    }

    /// c / (2B).
    pub fn range_resolution_m(&self) -> f64 {
        SPEED_OF_LIGHT / (2.0 * self.bandwidth_hz)
    }

    pub fn center_frequency_hz(&self) -> f64 {
        0.5 * (self.carrier_start_hz + self.carrier_stop_hz)
    }

    pub fn wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT / self.center_frequency_hz()
    }

    /// Radians of slow-time phase per metre of radial displacement (4π/λ).
    pub fn phase_per_metre(&self) -> f64 {
        4.0 * std::f64::consts::PI / self.wavelength_m()
    }

    /// Complex baseband sampling makes every fast-time bin a positive range.
    pub fn max_range_m(&self) -> f64 {
        self.range_resolution_m() * self.samples_per_chirp as f64
    }

    /// Default fast-time FFT size: next power of two at or above the sample count.
    pub fn fast_fft_len(&self) -> usize {
        self.samples_per_chirp.next_power_of_two()
    }

    pub fn frame_period_s(&self) -> f64 {
        1.0 / self.frame_rate_hz
    }
}

/// Chest-motion template.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BreathShape {
    #[default]
    Sinusoid,
    /// Quick raised-cosine inhale over 40% of the cycle, slower exhale.
    RaisedCosineInhale,
}

/// One sinusoidal balancing component, written `[freq_hz, amp_m, phase_rad]`
/// in configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "(f64, f64, f64)", into = "(f64, f64, f64)")]
pub struct SwayComponent {
    pub freq_hz: f64,
    pub amp_m: f64,
    pub phase_rad: f64,
}

impl SwayComponent {
    pub fn new(freq_hz: f64, amp_m: f64, phase_rad: f64) -> Self {
        Self {
            freq_hz,
            amp_m,
            phase_rad,
        }
    }
}

impl From<(f64, f64, f64)> for SwayComponent {
    fn from((freq_hz, amp_m, phase_rad): (f64, f64, f64)) -> Self {
        Self {
            freq_hz,
            amp_m,
            phase_rad,
        }
    }
}

impl From<SwayComponent> for (f64, f64, f64) {
    fn from(c: SwayComponent) -> Self {
        (c.freq_hz, c.amp_m, c.phase_rad)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SubjectScenario {
    pub distance_m: f64,
    pub breath_rate_bpm: f64,
    pub breath_amp_m: f64,
    pub breath_shape: BreathShape,
    /// Relative standard deviation of the instantaneous breathing rate
    /// (Ornstein–Uhlenbeck). Zero gives a constant rate.
    pub breath_rate_jitter: f64,
    /// Correlation time of the rate jitter, seconds.
    pub breath_rate_corr_s: f64,
    pub sway_components: Vec<SwayComponent>,
    /// Innovation std of the leaky random-walk sway term, metres per frame.
    pub sway_random_walk_std_m: f64,
    /// Per-sample SNR against the target tone; `inf` disables noise.
    pub noise_snr_db: f64,
    pub duration_s: f64,
    pub seed: u64,
}

impl Default for SubjectScenario {
    fn default() -> Self {
        Self {
            distance_m: 1.2,
            breath_rate_bpm: 15.0,
            breath_amp_m: 4e-3,
            breath_shape: BreathShape::Sinusoid,
            breath_rate_jitter: 0.0,
            breath_rate_corr_s: 5.0,
            sway_components: Vec::new(),
            sway_random_walk_std_m: 0.0,
            noise_snr_db: 30.0,
            duration_s: 60.0,
            seed: 0,
        }
    }
}

impl SubjectScenario {
    pub fn validate(&self, radar: &RadarConfig) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidScenario(m));
        let (lo, hi) = RATE_BAND_BPM;
        if !(lo..=hi).contains(&self.breath_rate_bpm) {
            return bad(format!("breath_rate_bpm {} outside [{lo}, {hi}]", self.breath_rate_bpm));
        }
        if !(self.breath_amp_m >= 0.0 && self.breath_amp_m.is_finite()) {
            return bad("breath_amp_m must be finite and non-negative".into());
        }
        let (dlo, dhi) = DISTANCE_RANGE_M;
        if !(dlo..=dhi).contains(&self.distance_m) {
            return bad(format!("distance_m {} outside [{dlo}, {dhi}]", self.distance_m));
        }
        if self.distance_m >= radar.max_range_m() {
            return bad(format!(
                "distance_m {} beyond unambiguous range {:.3} m",
                self.distance_m,
                radar.max_range_m()
            ));
        }
        let (slo, shi) = SWAY_BAND_HZ;
        for c in &self.sway_components {
            if !(slo..=shi).contains(&c.freq_hz) {
                return bad(format!("sway frequency {} Hz outside [{slo}, {shi}]", c.freq_hz));
            }
            if !(c.amp_m.is_finite() && c.phase_rad.is_finite()) {
                return bad("sway amplitude and phase must be finite".into());
            }
        }
        if !(self.breath_rate_jitter >= 0.0 && self.breath_rate_jitter.is_finite()) {
            return bad("breath_rate_jitter must be finite and non-negative".into());
        }
        if !(self.breath_rate_corr_s > 0.0) {
            return bad("breath_rate_corr_s must be positive".into());
        }
        if !(self.sway_random_walk_std_m >= 0.0 && self.sway_random_walk_std_m.is_finite()) {
            return bad("sway_random_walk_std_m must be finite and non-negative".into());
        }
        if self.noise_snr_db.is_nan() {
            return bad("noise_snr_db must not be NaN".into());
        }
        if !(self.duration_s >= 0.0 && self.duration_s.is_finite()) {
            return bad("duration_s must be finite and non-negative".into());
        }
        Ok(())
    }

    /// floor(duration × frame rate).
    pub fn frame_count(&self, radar: &RadarConfig) -> usize {
        // Guard against 10.0 * 20.0 landing a hair under 200.
        (self.duration_s * radar.frame_rate_hz + 1e-9).floor() as usize
    }
}
