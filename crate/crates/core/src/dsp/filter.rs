//! Zero-phase bandpass for the slow-time phase.
//!
//! Two realizations: a Butterworth highpass/lowpass biquad cascade (default)
//! and a Blackman windowed-sinc FIR. Both run forward and backward over an
//! odd-extended copy of the input, so peak locations in the breath band are
//! not shifted and the overall magnitude response is `|H|²`.
//!
//! Cutoffs are placed so the *combined* forward-backward response is −3 dB
//! at the band edges.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use super::phase::PhaseSignal;
use crate::error::{Error, Result};
use crate::num::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterDesign {
    FirWindow,
    #[default]
    BiquadCascade,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BandpassSpec {
    pub low_hz: f64,
    pub high_hz: f64,
    /// Minimum forward-backward attenuation at twice the upper cutoff.
    pub stopband_atten_db: f64,
    pub design: FilterDesign,
    /// Butterworth order per band edge (even). The lowpass order is raised
    /// automatically if the stopband target is not met.
    pub order: usize,
}

impl Default for BandpassSpec {
    fn default() -> Self {
        Self {
            low_hz: 0.1,
            high_hz: 0.8,
            stopband_atten_db: 30.0,
            design: FilterDesign::BiquadCascade,
            order: 6,
        }
    }
}

impl BandpassSpec {
    pub fn validate(&self, sample_rate_hz: f64) -> Result<()> {
        if !(self.low_hz > 0.0 && self.low_hz < self.high_hz && self.high_hz < sample_rate_hz / 2.0) {
            return Err(Error::InvalidInput(format!(
                "bandpass needs 0 < low ({}) < high ({}) < fs/2 ({})",
                self.low_hz,
                self.high_hz,
                sample_rate_hz / 2.0
            )));
        }
        if self.order < 2 || !self.order.is_multiple_of(2) || self.order > 16 {
            return Err(Error::InvalidInput(format!(
                "filter order {} must be even in [2, 16]",
                self.order
            )));
        }
        if !(self.stopband_atten_db >= 0.0) {
            return Err(Error::InvalidInput("stopband attenuation must be non-negative".into()));
        }
        Ok(())
    }
}

/// Direct-form II transposed biquad, `a0` normalized to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad<T> {
    pub b: [T; 3],
    pub a: [T; 2],
}

impl<T: Real> Biquad<T> {
    fn from_f64(b: [f64; 3], a: [f64; 3]) -> Self {
        Self {
            b: [T::lit(b[0] / a[0]), T::lit(b[1] / a[0]), T::lit(b[2] / a[0])],
            a: [T::lit(a[1] / a[0]), T::lit(a[2] / a[0])],
        }
    }

    fn lowpass(f0: f64, fs: f64, q: f64) -> Self {
        let w0 = 2.0 * PI * f0 / fs;
        let (s, c) = w0.sin_cos();
        let alpha = s / (2.0 * q);
        Self::from_f64(
            [(1.0 - c) / 2.0, 1.0 - c, (1.0 - c) / 2.0],
            [1.0 + alpha, -2.0 * c, 1.0 - alpha],
        )
    }

    fn highpass(f0: f64, fs: f64, q: f64) -> Self {
        let w0 = 2.0 * PI * f0 / fs;
        let (s, c) = w0.sin_cos();
        let alpha = s / (2.0 * q);
        Self::from_f64(
            [(1.0 + c) / 2.0, -(1.0 + c), (1.0 + c) / 2.0],
            [1.0 + alpha, -2.0 * c, 1.0 - alpha],
        )
    }

    pub fn dc_gain(&self) -> T {
        (self.b[0] + self.b[1] + self.b[2]) / (T::one() + self.a[0] + self.a[1])
    }

    /// |H(e^{jω})| at `f` Hz.
    pub fn magnitude(&self, f: f64, fs: f64) -> f64 {
        let w = 2.0 * PI * f / fs;
        let z1 = num_complex::Complex::from_polar(1.0, -w);
        let z2 = z1 * z1;
        let b: Vec<f64> = self.b.iter().map(|v| v.to_f64_lossy()).collect();
        let a: Vec<f64> = self.a.iter().map(|v| v.to_f64_lossy()).collect();
        let num = b[0] + z1 * b[1] + z2 * b[2];
        let den = 1.0 + z1 * a[0] + z2 * a[1];
        (num / den).norm()
    }

    /// Filters `x` in place starting from the steady state for a constant
    /// input equal to `level`.
    fn run(&self, x: &mut [T], level: T) {
        let g = self.dc_gain();
        let mut s2 = (self.b[2] - self.a[1] * g) * level;
        let mut s1 = (self.b[1] - self.a[0] * g) * level + s2;
        for v in x.iter_mut() {
            let input = *v;
            let y = self.b[0] * input + s1;
            s1 = self.b[1] * input - self.a[0] * y + s2;
            s2 = self.b[2] * input - self.a[1] * y;
            *v = y;
        }
    }
}

/// Section quality factors of an even-order Butterworth prototype.
fn butterworth_qs(order: usize) -> Vec<f64> {
    (1..=order / 2)
        .map(|k| {
            let theta = (2 * k - 1) as f64 * PI / (2 * order) as f64;
            1.0 / (2.0 * theta.cos())
        })
        .collect()
}

fn prewarp(f: f64, fs: f64) -> f64 {
    (PI * f / fs).tan()
}

fn unwarp(omega: f64, fs: f64) -> f64 {
    omega.atan() * fs / PI
}

#[derive(Debug, Clone)]
enum Realization<T> {
    Cascade(Vec<Biquad<T>>),
    Fir(Vec<T>),
}

/// A designed bandpass bound to one sample rate.
#[derive(Debug, Clone)]
pub struct Bandpass<T> {
    spec: BandpassSpec,
    sample_rate_hz: f64,
    realization: Realization<T>,
    order: usize,
}

const MAX_ORDER: usize = 16;

impl<T: Real> Bandpass<T> {
    pub fn design(spec: &BandpassSpec, sample_rate_hz: f64) -> Result<Self> {
        spec.validate(sample_rate_hz)?;
        let fs = sample_rate_hz;
        // Per-pass |H|² = 1/√2 at the edge gives −3 dB after two passes.
        let edge = SQRT_2 - 1.0;
        match spec.design {
            FilterDesign::BiquadCascade => {
                let hp_order = spec.order;
                let hp_fc = unwarp(prewarp(spec.low_hz, fs) * edge.powf(1.0 / (2 * hp_order) as f64), fs);
                let mut lp_order = spec.order;
                loop {
                    let lp_fc = unwarp(prewarp(spec.high_hz, fs) / edge.powf(1.0 / (2 * lp_order) as f64), fs);
                    let mut sections: Vec<Biquad<T>> = butterworth_qs(hp_order)
                        .into_iter()
                        .map(|q| Biquad::highpass(hp_fc, fs, q))
                        .collect();
                    if lp_fc < fs / 2.0 {
                        sections.extend(
                            butterworth_qs(lp_order)
                                .into_iter()
                                .map(|q| Biquad::lowpass(lp_fc, fs, q)),
                        );
                    }
                    let bp = Self {
                        spec: *spec,
                        sample_rate_hz: fs,
                        realization: Realization::Cascade(sections),
                        order: hp_order + lp_order,
                    };
                    let probe = 2.0 * spec.high_hz;
                    if probe >= fs / 2.0 || bp.attenuation_db(probe) >= spec.stopband_atten_db || lp_order >= MAX_ORDER
                    {
                        return Ok(bp);
                    }
                    lp_order += 2;
                }
            }
            FilterDesign::FirWindow => {
                // Blackman transition width ≈ 5.5 fs / N; place the full
                // transition between the upper edge and twice the upper edge.
                let mut n = (5.5 * fs / spec.high_hz).ceil() as usize;
                if n.is_multiple_of(2) {
                    n += 1;
                }
                let taps = windowed_sinc_bandpass(spec.low_hz, spec.high_hz, fs, n);
                Ok(Self {
                    spec: *spec,
                    sample_rate_hz: fs,
                    realization: Realization::Fir(taps.into_iter().map(T::lit).collect()),
                    order: n - 1,
                })
            }
        }
    }

    pub fn spec(&self) -> &BandpassSpec {
        &self.spec
    }

    /// Total filter order (sum over sections, or FIR length − 1).
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn min_len(&self) -> usize {
        3 * self.order
    }

    /// Forward-backward magnitude response at `f` Hz.
    pub fn magnitude(&self, f: f64) -> f64 {
        let single = match &self.realization {
            Realization::Cascade(s) => s.iter().map(|b| b.magnitude(f, self.sample_rate_hz)).product::<f64>(),
            Realization::Fir(h) => {
                let w = 2.0 * PI * f / self.sample_rate_hz;
                h.iter()
                    .enumerate()
                    .map(|(k, &c)| num_complex::Complex::from_polar(c.to_f64_lossy(), -w * k as f64))
                    .sum::<num_complex::Complex<f64>>()
                    .norm()
            }
        };
        single * single
    }

    pub fn attenuation_db(&self, f: f64) -> f64 {
        -20.0 * self.magnitude(f).log10()
    }

    fn pad_len(&self, n: usize) -> usize {
        let wanted = (self.sample_rate_hz / self.spec.low_hz).ceil() as usize;
        let wanted = match &self.realization {
            Realization::Fir(h) => wanted.max(h.len()),
            Realization::Cascade(_) => wanted,
        };
        wanted.max(3 * self.order).min(n - 1)
    }

    /// Zero-phase filtering of a raw sample slice.
    pub fn apply(&self, x: &[T]) -> Result<Vec<T>> {
        let need = self.min_len();
        if x.len() < need.max(2) {
            return Err(Error::InsufficientData {
                needed: need.max(2),
                got: x.len(),
            });
        }
        let pad = self.pad_len(x.len());
        let n = x.len();
        let two = T::lit(2.0);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| two * x[0] - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| two * x[n - 1] - x[n - 1 - i]));

        self.one_pass(&mut ext);
        ext.reverse();
        self.one_pass(&mut ext);
        ext.reverse();
        Ok(ext[pad..pad + n].to_vec())
    }

    fn one_pass(&self, x: &mut [T]) {
        match &self.realization {
            Realization::Cascade(sections) => {
                let mut level = x[0];
                for s in sections {
                    s.run(x, level);
                    level = level * s.dc_gain();
                }
            }
            Realization::Fir(h) => {
                // Causal FIR with its state preloaded for a constant history of x[0].
                let x0 = x[0];
                let input = x.to_vec();
                for (i, out) in x.iter_mut().enumerate() {
                    let mut acc = T::zero();
                    for (k, &c) in h.iter().enumerate() {
                        let v = if i >= k { input[i - k] } else { x0 };
                        acc = acc + c * v;
                    }
                    *out = acc;
                }
            }
        }
    }
}

fn windowed_sinc_bandpass(low: f64, high: f64, fs: f64, n: usize) -> Vec<f64> {
    let m = (n - 1) as f64;
    let lowpass = |fc: f64| -> Vec<f64> {
        let wc = 2.0 * fc / fs;
        let h: Vec<f64> = (0..n)
            .map(|i| {
                let t = i as f64 - m / 2.0;
                let sinc = if t == 0.0 { wc } else { (PI * wc * t).sin() / (PI * t) };
                let w = 0.42 - 0.5 * (2.0 * PI * i as f64 / m).cos() + 0.08 * (4.0 * PI * i as f64 / m).cos();
                sinc * w
            })
            .collect();
        let sum: f64 = h.iter().sum();
        h.into_iter().map(|v| v / sum).collect()
    };
    lowpass(high).iter().zip(lowpass(low)).map(|(a, b)| a - b).collect()
}

/// Zero-phase bandpass of a phase signal.
pub fn bandpass<T: Real>(signal: &PhaseSignal<T>, spec: &BandpassSpec) -> Result<PhaseSignal<T>> {
    let bp = Bandpass::design(spec, signal.sample_rate_hz.to_f64_lossy())?;
    Ok(PhaseSignal {
        samples: bp.apply(&signal.samples)?,
        sample_rate_hz: signal.sample_rate_hz,
        origin_bin: signal.origin_bin,
    })
}
