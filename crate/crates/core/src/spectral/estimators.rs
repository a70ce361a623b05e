//! Rate estimators built on the peak set and the spectrum.

use serde::{Deserialize, Serialize};

use super::peaks::{Peak, PeakSet};
use super::spectrum::BreathSpectrum;
use crate::error::{Error, Result};
use crate::num::Real;

/// Peaks used by the weighted averages when not stated otherwise.
pub const DEFAULT_AVERAGED_PEAKS: usize = 3;

/// Rate of the single strongest peak.
pub fn classical_estimate<T: Real>(peaks: &PeakSet<T>) -> Result<T> {
    peaks
        .peaks
        .first()
        .map(|p| p.rate_bpm)
        .ok_or(Error::NoEstimate("empty peak set"))
}

fn weighted_rate<T: Real>(peaks: &[Peak<T>], weight: impl Fn(&Peak<T>) -> T, what: &'static str) -> Result<T> {
    if peaks.is_empty() {
        return Err(Error::NoEstimate("empty peak set"));
    }
    // Infinite weights dominate every finite one: average over those alone.
    let infinite: Vec<&Peak<T>> = peaks.iter().filter(|p| weight(p).is_infinite()).collect();
    if !infinite.is_empty() {
        return Ok(infinite.iter().map(|p| p.rate_bpm).sum::<T>() / T::from_usize_lossy(infinite.len()));
    }
    let total: T = peaks.iter().map(&weight).sum();
    if !(total > T::zero()) {
        return Err(Error::NoEstimate(what));
    }
    Ok(peaks.iter().map(|p| p.rate_bpm * weight(p)).sum::<T>() / total)
}

/// Confidence-weighted mean rate of the `n` strongest peaks.
pub fn cm_weighted<T: Real>(peaks: &PeakSet<T>, n: usize) -> Result<T> {
    weighted_rate(peaks.top(n), |p| p.cm, "all confidence metrics are zero")
}

/// Power-weighted mean rate of the `n` strongest peaks.
pub fn power_peaks_weighted<T: Real>(peaks: &PeakSet<T>, n: usize) -> Result<T> {
    weighted_rate(peaks.top(n), |p| p.power, "peak power sums to zero")
}

/// Which spectrum bins the power-weighted average runs over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PowerSpan {
    /// From DC up to the upper band edge (the displayed breath axis).
    #[default]
    UpToBandTop,
    /// Only bins inside the detection band.
    InBand,
    /// Every bin of the one-sided spectrum.
    Full,
}

/// Power-weighted mean rate over the default span.
pub fn power_weighted<T: Real>(spectrum: &BreathSpectrum<T>) -> Result<T> {
    power_weighted_over(spectrum, PowerSpan::default())
}

pub fn power_weighted_over<T: Real>(spectrum: &BreathSpectrum<T>, span: PowerSpan) -> Result<T> {
    let keep = |k: usize| match span {
        PowerSpan::Full => true,
        PowerSpan::InBand => spectrum.in_band(k),
        PowerSpan::UpToBandTop => spectrum.rate_of(k) <= spectrum.band.1,
    };
    let (mut num, mut den) = (T::zero(), T::zero());
    for (k, &p) in spectrum.power.iter().enumerate().filter(|(k, _)| keep(*k)) {
        num = num + spectrum.rate_of(k) * p;
        den = den + p;
    }
    if !(den > T::zero()) {
        return Err(Error::NoEstimate("no spectral power"));
    }
    Ok(num / den)
}
