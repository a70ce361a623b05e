//! Torso displacement models: breathing plus weight-balancing sway.

use std::f64::consts::{PI, TAU};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::config::{BreathShape, SwayComponent, RATE_BAND_BPM};
use crate::error::{Error, Result};

/// AR(1) coefficient of the sway random walk; keeps its variance finite.
pub const RANDOM_WALK_LEAK: f64 = 0.995;

const INHALE_FRACTION: f64 = 0.4;

/// Normalized chest template at cycle position `u` (cycles, any real).
fn shape_at(shape: BreathShape, cycles: f64) -> f64 {
    match shape {
        BreathShape::Sinusoid => (TAU * cycles).sin(),
        BreathShape::RaisedCosineInhale => {
            let u = cycles - cycles.floor();
            if u < INHALE_FRACTION {
                -(PI * u / INHALE_FRACTION).cos()
            } else {
                (PI * (u - INHALE_FRACTION) / (1.0 - INHALE_FRACTION)).cos()
            }
        }
    }
}

/// Chest displacement at time `t` for a constant breathing rate.
pub fn breathing_waveform(rate_bpm: f64, amp_m: f64, t: f64, shape: BreathShape) -> Result<f64> {
    let (lo, hi) = RATE_BAND_BPM;
    if !(lo..=hi).contains(&rate_bpm) {
        return Err(Error::InvalidScenario(format!(
            "breath rate {rate_bpm} bpm outside [{lo}, {hi}]"
        )));
    }
    if !(amp_m >= 0.0) {
        return Err(Error::InvalidScenario("breath amplitude must be non-negative".into()));
    }
    Ok(amp_m * shape_at(shape, rate_bpm / 60.0 * t))
}

/// Breathing source sampled on the slow-time grid, with optional
/// Ornstein–Uhlenbeck jitter on the instantaneous rate.
#[derive(Debug, Clone)]
pub struct BreathModel {
    rate_bpm: f64,
    amp_m: f64,
    shape: BreathShape,
    jitter: f64,
    corr_s: f64,
    sample_rate_hz: f64,
    rng: ChaCha8Rng,
    deviation: f64,
    cycles: f64,
    step: u64,
}

impl BreathModel {
    pub fn new(
        rate_bpm: f64,
        amp_m: f64,
        shape: BreathShape,
        jitter: f64,
        corr_s: f64,
        sample_rate_hz: f64,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        let z: f64 = StandardNormal.sample(&mut rng);
        Self {
            rate_bpm,
            amp_m,
            shape,
            jitter,
            corr_s,
            sample_rate_hz,
            rng,
            deviation: jitter * z,
            cycles: 0.0,
            step: 0,
        }
    }

    /// Next `(instantaneous rate bpm, displacement m)` sample.
    pub fn next_sample(&mut self) -> (f64, f64) {
        let t = self.step as f64 / self.sample_rate_hz;
        self.step += 1;
        if self.jitter == 0.0 {
            let d = self.amp_m * shape_at(self.shape, self.rate_bpm / 60.0 * t);
            return (self.rate_bpm, d);
        }
        let (lo, hi) = RATE_BAND_BPM;
        let rate = (self.rate_bpm * (1.0 + self.deviation)).clamp(lo, hi);
        let d = self.amp_m * shape_at(self.shape, self.cycles);
        self.cycles += rate / 60.0 / self.sample_rate_hz;
        let a = (-1.0 / (self.sample_rate_hz * self.corr_s)).exp();
        let z: f64 = StandardNormal.sample(&mut self.rng);
        self.deviation = a * self.deviation + (1.0 - a * a).sqrt() * self.jitter * z;
        (rate, d)
    }
}

/// Sum of balancing sinusoids plus a leaky random walk, sampled on the
/// slow-time grid. Identical seeds reproduce the walk sample by sample.
#[derive(Debug, Clone)]
pub struct SwayModel {
    components: Vec<SwayComponent>,
    rw_std: f64,
    sample_rate_hz: f64,
    rng: ChaCha8Rng,
    walk: f64,
    step: u64,
}

impl SwayModel {
    pub fn new(components: &[SwayComponent], rw_std_m: f64, seed: u64, sample_rate_hz: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(2);
        Self {
            components: components.to_vec(),
            rw_std: rw_std_m,
            sample_rate_hz,
            rng,
            walk: 0.0,
            step: 0,
        }
    }

    fn sinusoids(&self, t: f64) -> f64 {
        self.components
            .iter()
            .map(|c| c.amp_m * (TAU * c.freq_hz * t + c.phase_rad).sin())
            .sum()
    }

    pub fn next_sample(&mut self) -> f64 {
        let t = self.step as f64 / self.sample_rate_hz;
        self.step += 1;
        let out = self.sinusoids(t) + self.walk;
        if self.rw_std > 0.0 {
            let z: f64 = StandardNormal.sample(&mut self.rng);
            self.walk = RANDOM_WALK_LEAK * self.walk + self.rw_std * z;
        }
        out
    }
}

/// Sway displacement at time `t`, replaying the walk from sample zero.
///
/// The walk advances once per `1/sample_rate_hz`; `t` is floored onto that grid.
pub fn sway_waveform(
    components: &[SwayComponent],
    random_walk_std_m: f64,
    t: f64,
    seed: u64,
    sample_rate_hz: f64,
) -> f64 {
    let mut model = SwayModel::new(components, random_walk_std_m, seed, sample_rate_hz);
    let steps = (t * sample_rate_hz + 1e-9).floor().max(0.0) as u64;
    for _ in 0..steps {
        model.next_sample();
    }
    model.walk + model.sinusoids(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn breathing_examples() {
        let s = BreathShape::Sinusoid;
        assert_abs_diff_eq!(breathing_waveform(15.0, 4e-3, 0.0, s).unwrap(), 0.0);
        assert_abs_diff_eq!(breathing_waveform(15.0, 4e-3, 1.0, s).unwrap(), 4e-3, epsilon = 1e-15);
        assert_abs_diff_eq!(breathing_waveform(30.0, 2e-3, 2.0, s).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn breathing_rejects_out_of_band_rate() {
        assert!(matches!(
            breathing_waveform(55.0, 1e-3, 0.0, BreathShape::Sinusoid),
            Err(Error::InvalidScenario(_))
        ));
        assert!(breathing_waveform(5.0, 1e-3, 0.0, BreathShape::Sinusoid).is_err());
    }

    #[test]
    fn shapes_are_periodic_bounded_and_zero_mean() {
        for shape in [BreathShape::Sinusoid, BreathShape::RaisedCosineInhale] {
            let rate = 12.0;
            let period = 60.0 / rate;
            let n = 4000;
            let mut mean = 0.0;
            for i in 0..n {
                let t = period * i as f64 / n as f64;
                let a = breathing_waveform(rate, 3e-3, t, shape).unwrap();
                let b = breathing_waveform(rate, 3e-3, t + 3.0 * period, shape).unwrap();
                assert_abs_diff_eq!(a, b, epsilon = 1e-12);
                assert!(a.abs() <= 3e-3 + 1e-15);
                mean += a / n as f64;
            }
            assert_abs_diff_eq!(mean, 0.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn sway_examples() {
        assert_eq!(sway_waveform(&[], 0.0, 12.3, 7, 20.0), 0.0);
        let c = SwayComponent::new(0.3, 1e-3, 0.0);
        assert_abs_diff_eq!(sway_waveform(&[c], 0.0, 0.0, 1, 20.0), 0.0);
        let c = SwayComponent::new(0.3, 1e-3, FRAC_PI_2);
        assert_abs_diff_eq!(sway_waveform(&[c], 0.0, 0.0, 1, 20.0), 1e-3, epsilon = 1e-18);
    }

    #[test]
    fn sway_walk_is_seeded() {
        let c = [SwayComponent::new(0.2, 5e-4, 0.3)];
        let a: Vec<f64> = {
            let mut m = SwayModel::new(&c, 1e-5, 42, 20.0);
            (0..500).map(|_| m.next_sample()).collect()
        };
        let mut m = SwayModel::new(&c, 1e-5, 42, 20.0);
        let b: Vec<f64> = (0..500).map(|_| m.next_sample()).collect();
        assert_eq!(a, b);
        let mut m = SwayModel::new(&c, 1e-5, 43, 20.0);
        let d: Vec<f64> = (0..500).map(|_| m.next_sample()).collect();
        assert_ne!(a, d);
        assert_eq!(sway_waveform(&c, 1e-5, 499.0 / 20.0, 42, 20.0), a[499]);
    }

    #[test]
    fn jittered_breath_rate_stays_in_band() {
        let mut m = BreathModel::new(48.0, 2e-3, BreathShape::Sinusoid, 0.3, 2.0, 20.0, 9);
        for _ in 0..5000 {
            let (r, d) = m.next_sample();
            assert!((6.0..=50.0).contains(&r));
            assert!(d.abs() <= 2e-3);
        }
    }
}
