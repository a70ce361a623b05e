//! Fast-time processing: chirp averaging, range FFT and target-bin choice.

use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Real;
use crate::synthesis::{Frame, RadarConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    Rect,
    #[default]
    Hann,
}

impl Window {
    /// Periodic-free (symmetric) coefficients of length `n`.
    pub fn coefficients<T: Real>(self, n: usize) -> Vec<T> {
        match self {
            Window::Rect => vec![T::one(); n],
            Window::Hann if n < 2 => vec![T::one(); n],
            Window::Hann => (0..n)
                .map(|i| {
                    let x = std::f64::consts::TAU * i as f64 / (n - 1) as f64;
                    T::lit(0.5 - 0.5 * x.cos())
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RangeProfile<T> {
    pub bins: Vec<Complex<T>>,
    pub bin_width_m: T,
    pub frame_index: usize,
}

impl<T: Real> RangeProfile<T> {
    pub fn range_of(&self, bin: usize) -> T {
        self.bin_width_m * T::from_usize_lossy(bin)
    }

    pub fn argmax(&self) -> usize {
        argmax_lower(self.bins.iter().map(|c| c.norm_sqr()))
    }
}

/// Index of the largest value; ties resolve to the lowest index.
pub(crate) fn argmax_lower<T: PartialOrd>(values: impl IntoIterator<Item = T>) -> usize {
    let mut best: Option<(usize, T)> = None;
    for (i, v) in values.into_iter().enumerate() {
        match &best {
            Some((_, b)) if !(v > *b) => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i).unwrap_or(0)
}

/// Planned range transform for one radar configuration.
pub struct RangeFft<T: Real> {
    fft: Arc<dyn Fft<T>>,
    window: Vec<T>,
    chirps: usize,
    samples: usize,
    fft_len: usize,
    bin_width_m: T,
    buf: Vec<Complex<T>>,
    scratch: Vec<Complex<T>>,
}

impl<T: Real> RangeFft<T> {
    pub fn new(config: &RadarConfig, window: Window, fft_len: usize) -> Result<Self> {
        config.validate().map_err(|e| Error::InvalidInput(e.to_string()))?;
        if fft_len < config.samples_per_chirp {
            return Err(Error::InvalidInput(format!(
                "range FFT length {fft_len} shorter than {} samples",
                config.samples_per_chirp
            )));
        }
        let fft = FftPlanner::new().plan_fft_forward(fft_len);
        let mut win = window.coefficients::<T>(config.samples_per_chirp);
        // Unit coherent gain so a unit tone reads ~1 in its bin.
        let norm = T::one() / (win.iter().copied().sum::<T>() * T::from_usize_lossy(config.chirps_per_frame));
        win.iter_mut().for_each(|w| *w = *w * norm);
        let scratch = vec![Complex::default(); fft.get_inplace_scratch_len()];
        Ok(Self {
            fft,
            window: win,
            chirps: config.chirps_per_frame,
            samples: config.samples_per_chirp,
            fft_len,
            bin_width_m: T::lit(config.range_resolution_m() * config.samples_per_chirp as f64 / fft_len as f64),
            buf: vec![Complex::default(); fft_len],
            scratch,
        })
    }

    pub fn fft_len(&self) -> usize {
        self.fft_len
    }

    pub fn bin_width_m(&self) -> T {
        self.bin_width_m
    }

    pub fn process(&mut self, frame: &Frame<T>, frame_index: usize) -> Result<RangeProfile<T>> {
        if frame.chirps() == 0 || frame.samples() == 0 {
            return Err(Error::InvalidInput("empty frame".into()));
        }
        if frame.chirps() != self.chirps || frame.samples() != self.samples {
            return Err(Error::InvalidInput(format!(
                "frame is {}x{}, expected {}x{}",
                frame.chirps(),
                frame.samples(),
                self.chirps,
                self.samples
            )));
        }
        self.buf.iter_mut().for_each(|b| *b = Complex::default());
        for c in 0..self.chirps {
            for (acc, &s) in self.buf.iter_mut().zip(frame.chirp(c)) {
                *acc = *acc + s;
            }
        }
        for (b, &w) in self.buf.iter_mut().zip(&self.window) {
            *b = b.scale(w);
        }
        self.fft.process_with_scratch(&mut self.buf, &mut self.scratch);
        Ok(RangeProfile {
            bins: self.buf.clone(),
            bin_width_m: self.bin_width_m,
            frame_index,
        })
    }
}

/// Range profile of a single frame at the configuration's default FFT size.
pub fn range_fft<T: Real>(frame: &Frame<T>, config: &RadarConfig, window: Window) -> Result<RangeProfile<T>> {
    if frame.chirps() == 0 || frame.samples() == 0 {
        return Err(Error::InvalidInput("empty frame".into()));
    }
    RangeFft::new(config, window, config.fast_fft_len())?.process(frame, 0)
}

/// Outcome of target-bin selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetBin<T> {
    pub bin: usize,
    pub range_m: T,
    pub mean_magnitude: T,
    /// Median of the per-bin mean magnitudes over the whole profile.
    pub noise_floor: T,
    /// Set when the chosen bin is not clearly above the noise floor.
    pub low_power: bool,
}

/// A selected bin must exceed the median bin magnitude by this factor (12 dB)
/// to count as a real reflector.
pub const LOW_POWER_RATIO: f64 = 4.0;

/// Picks the bin with the greatest mean magnitude inside `search_range_m`.
pub fn select_target_bin<T: Real>(profiles: &[RangeProfile<T>], search_range_m: (T, T)) -> Result<TargetBin<T>> {
    let first = profiles
        .first()
        .ok_or_else(|| Error::InvalidInput("no range profiles".into()))?;
    let n = first.bins.len();
    if profiles.iter().any(|p| p.bins.len() != n) {
        return Err(Error::InvalidInput("range profiles differ in length".into()));
    }
    let mut means = vec![T::zero(); n];
    for p in profiles {
        for (m, c) in means.iter_mut().zip(&p.bins) {
            *m = *m + c.norm();
        }
    }
    let count = T::from_usize_lossy(profiles.len());
    means.iter_mut().for_each(|m| *m = *m / count);
    select_from_means(&means, first.bin_width_m, search_range_m)
}

pub(crate) fn select_from_means<T: Real>(means: &[T], bin_width_m: T, (lo, hi): (T, T)) -> Result<TargetBin<T>> {
    let max_range = bin_width_m * T::from_usize_lossy(means.len());
    if !(lo >= T::zero() && hi <= max_range && lo <= hi) {
        return Err(Error::InvalidInput(format!(
            "search interval [{lo}, {hi}] m outside unambiguous range [0, {max_range}] m"
        )));
    }
    let in_range: Vec<usize> = (0..means.len())
        .filter(|&k| {
            let r = bin_width_m * T::from_usize_lossy(k);
            r >= lo && r <= hi
        })
        .collect();
    if in_range.is_empty() {
        return Err(Error::InvalidInput(format!("no range bin inside [{lo}, {hi}] m")));
    }
    let best = in_range[argmax_lower(in_range.iter().map(|&k| means[k]))];
    let mut sorted = means.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let noise_floor = sorted[sorted.len() / 2];
    let mean_magnitude = means[best];
    Ok(TargetBin {
        bin: best,
        range_m: bin_width_m * T::from_usize_lossy(best),
        mean_magnitude,
        noise_floor,
        low_power: !(mean_magnitude > noise_floor * T::lit(LOW_POWER_RATIO)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthesis::{synthesize_frames, SubjectScenario};
    use approx::assert_abs_diff_eq;

    fn static_target(distance_m: f64) -> crate::synthesis::FrameSequence<f64> {
        let s = SubjectScenario {
            distance_m,
            breath_amp_m: 0.0,
            noise_snr_db: f64::INFINITY,
            duration_s: 1.0,
            ..Default::default()
        };
        synthesize_frames(&RadarConfig::default(), &s).unwrap()
    }

    #[test]
    fn target_at_0755_lands_on_native_bin_19() {
        let seq = static_target(0.755);
        let cfg = seq.config;
        let mut rf = RangeFft::new(&cfg, Window::Rect, cfg.samples_per_chirp).unwrap();
        for (i, f) in seq.frames.iter().enumerate() {
            assert_eq!(rf.process(f, i).unwrap().argmax(), 19);
        }
    }

    #[test]
    fn zero_padded_grid_places_target_by_range() {
        let seq = static_target(0.755);
        let p = range_fft(&seq.frames[0], &seq.config, Window::Rect).unwrap();
        assert_eq!(p.bins.len(), 256);
        let expected = (0.755 / p.bin_width_m).round() as usize;
        assert_eq!(expected, 24);
        assert_eq!(p.argmax(), expected);
    }

    #[test]
    fn zero_frame_gives_zero_profile() {
        let cfg = RadarConfig::default();
        let f = Frame::<f64>::zeros(2, 200);
        let p = range_fft(&f, &cfg, Window::Hann).unwrap();
        assert!(p.bins.iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn empty_frame_is_invalid() {
        let cfg = RadarConfig::default();
        let f = Frame::<f64>::zeros(0, 0);
        assert!(matches!(range_fft(&f, &cfg, Window::Rect), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn global_rotation_commutes_with_transform() {
        let seq = static_target(1.1);
        let alpha = 0.7f64;
        let rot = Complex::from_polar(1.0, alpha);
        let mut rotated = seq.frames[3].clone();
        rotated.data_mut().iter_mut().for_each(|s| *s *= rot);
        let a = range_fft(&seq.frames[3], &seq.config, Window::Hann).unwrap();
        let b = range_fft(&rotated, &seq.config, Window::Hann).unwrap();
        for (x, y) in a.bins.iter().zip(&b.bins) {
            assert_abs_diff_eq!((x * rot - y).norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn selects_target_inside_interval() {
        let seq = static_target(0.755);
        let cfg = seq.config;
        let mut rf = RangeFft::new(&cfg, Window::Rect, cfg.samples_per_chirp).unwrap();
        let profiles: Vec<_> = seq
            .frames
            .iter()
            .enumerate()
            .map(|(i, f)| rf.process(f, i).unwrap())
            .collect();
        let t = select_target_bin(&profiles, (0.5, 1.2)).unwrap();
        assert_eq!(t.bin, 19);
        assert!(!t.low_power);
    }

    fn flat_profiles(n: usize, bins: usize, targets: &[(usize, f64)]) -> Vec<RangeProfile<f64>> {
        (0..n)
            .map(|f| {
                let mut v: Vec<Complex<f64>> = (0..bins)
                    .map(|k| {
                        // deterministic "noise" with magnitudes in [0.5, 1.5]
                        let m = 1.0 + 0.5 * ((k * 7 + f * 13) as f64).sin();
                        Complex::from_polar(m, (k + f) as f64)
                    })
                    .collect();
                for &(k, a) in targets {
                    v[k] = Complex::from_polar(a, f as f64 * 0.1);
                }
                RangeProfile {
                    bins: v,
                    bin_width_m: 0.05,
                    frame_index: f,
                }
            })
            .collect()
    }

    #[test]
    fn equal_targets_tie_break_to_lower_bin() {
        let p = flat_profiles(5, 64, &[(20, 50.0), (30, 50.0)]);
        assert_eq!(select_target_bin(&p, (0.5, 2.0)).unwrap().bin, 20);
    }

    #[test]
    fn interval_missing_target_is_flagged_low_power() {
        let p = flat_profiles(8, 64, &[(15, 100.0)]);
        let t = select_target_bin(&p, (1.5, 2.5)).unwrap();
        assert!((30..=50).contains(&t.bin));
        assert!(t.low_power);
        let t = select_target_bin(&p, (0.5, 1.0)).unwrap();
        assert_eq!(t.bin, 15);
        assert!(!t.low_power);
    }

    #[test]
    fn empty_interval_is_an_error() {
        let p = flat_profiles(2, 64, &[]);
        assert!(select_target_bin(&p, (1.01, 1.02)).is_err());
        assert!(select_target_bin(&p, (0.0, 10.0)).is_err());
        assert!(select_target_bin::<f64>(&[], (0.0, 1.0)).is_err());
    }
}
