use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::dsp::{PhaseSignal, Window};
use crate::error::{Error, Result};
use crate::num::Real;
use crate::synthesis::config::RATE_BAND_BPM;

/// One-sided power spectrum of the bandpassed breathing waveform.
///
/// Bin `k` sits at `k · bin_spacing_bpm`. Bins outside `band` are kept (they
/// feed the confidence-metric denominator) but never become peaks.
#[derive(Debug, Clone, PartialEq)]
pub struct BreathSpectrum<T> {
    pub power: Vec<T>,
    pub bin_spacing_bpm: T,
    pub band: (T, T),
    pub fft_len: usize,
    pub sample_rate_hz: T,
}

impl<T: Real> BreathSpectrum<T> {
    /// Wraps an existing power vector (e.g. a tabulated spectrum).
    pub fn from_power(power: Vec<T>, sample_rate_hz: T, fft_len: usize) -> Result<Self> {
        if power.iter().any(|p| !(*p >= T::zero())) {
            return Err(Error::InvalidInput("spectrum power must be non-negative".into()));
        }
        if fft_len == 0 || !(sample_rate_hz > T::zero()) {
            return Err(Error::InvalidInput(
                "spectrum needs fft_len > 0 and a positive sample rate".into(),
            ));
        }
        Ok(Self {
            power,
            bin_spacing_bpm: T::lit(60.0) * sample_rate_hz / T::from_usize_lossy(fft_len),
            band: (T::lit(RATE_BAND_BPM.0), T::lit(RATE_BAND_BPM.1)),
            fft_len,
            sample_rate_hz,
        })
    }

    pub fn len(&self) -> usize {
        self.power.len()
    }

    pub fn is_empty(&self) -> bool {
        self.power.is_empty()
    }

    pub fn rate_of(&self, bin: usize) -> T {
        T::from_usize_lossy(bin) * self.bin_spacing_bpm
    }

    pub fn in_band(&self, bin: usize) -> bool {
        let r = self.rate_of(bin);
        r >= self.band.0 && r <= self.band.1
    }

    pub fn total_power(&self) -> T {
        self.power.iter().copied().sum()
    }

    /// Same spectrum with every bin multiplied by `c`.
    pub fn scaled(&self, c: T) -> Self {
        Self {
            power: self.power.iter().map(|&p| p * c).collect(),
            ..self.clone()
        }
    }
}

/// Minimum analysed duration, seconds.
pub const MIN_SPECTRUM_SECONDS: f64 = 2.0;

/// Reusable slow-time spectral analyser (Hann window, zero padding).
pub struct SpectrumAnalyzer<T: Real> {
    fft: Arc<dyn Fft<T>>,
    fft_len: usize,
    windows: HashMap<usize, Vec<T>>,
    buf: Vec<Complex<T>>,
    scratch: Vec<Complex<T>>,
}

impl<T: Real> SpectrumAnalyzer<T> {
    pub fn new(fft_len: usize) -> Result<Self> {
        if fft_len < 2 {
            return Err(Error::InvalidInput("fft_len must be at least 2".into()));
        }
        let fft = FftPlanner::new().plan_fft_forward(fft_len);
        let scratch = vec![Complex::default(); fft.get_inplace_scratch_len()];
        Ok(Self {
            fft,
            fft_len,
            windows: HashMap::new(),
            buf: vec![Complex::default(); fft_len],
            scratch,
        })
    }

    pub fn fft_len(&self) -> usize {
        self.fft_len
    }

    pub fn analyze(&mut self, filtered: &PhaseSignal<T>) -> Result<BreathSpectrum<T>> {
        let n = filtered.len();
        let fs = filtered.sample_rate_hz;
        let needed = (MIN_SPECTRUM_SECONDS * fs.to_f64_lossy()).ceil() as usize;
        if n < needed.max(2) {
            return Err(Error::InsufficientData {
                needed: needed.max(2),
                got: n,
            });
        }
        if n > self.fft_len {
            return Err(Error::InvalidInput(format!(
                "signal length {n} exceeds fft_len {}",
                self.fft_len
            )));
        }
        let mean = filtered.samples.iter().copied().sum::<T>() / T::from_usize_lossy(n);
        let window = self.windows.entry(n).or_insert_with(|| Window::Hann.coefficients(n));
        for (b, (&x, &w)) in self.buf.iter_mut().zip(filtered.samples.iter().zip(window.iter())) {
            *b = Complex::new((x - mean) * w, T::zero());
        }
        self.buf[n..].iter_mut().for_each(|b| *b = Complex::default());
        self.fft.process_with_scratch(&mut self.buf, &mut self.scratch);
        let power = self.buf[..=self.fft_len / 2].iter().map(|c| c.norm_sqr()).collect();
        BreathSpectrum::from_power(power, fs, self.fft_len)
    }
}

/// Mean-removed, Hann-windowed, zero-padded power spectrum.
pub fn breath_spectrum<T: Real>(filtered: &PhaseSignal<T>, fft_len: usize) -> Result<BreathSpectrum<T>> {
    SpectrumAnalyzer::new(fft_len)?.analyze(filtered)
}
