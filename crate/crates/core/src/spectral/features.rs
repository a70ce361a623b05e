//! Regressor input: the three strongest peaks plus the three averages.

use super::estimators::{cm_weighted, power_peaks_weighted, power_weighted};
use super::peaks::PeakSet;
use super::spectrum::BreathSpectrum;
use crate::num::Real;

pub const FEATURE_DIM: usize = 12;
/// Peaks described individually in the feature vector.
pub const FEATURE_PEAKS: usize = 3;
/// Stand-in for an infinite confidence metric.
pub const CM_FEATURE_CAP: f64 = 1e6;

/// Ordered as `[RR1..3, ln(1+P1..3), CM1..3, cm_weighted, power_weighted,
/// power_peaks_weighted]`. Standardization happens inside the model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector<T> {
    pub values: [T; FEATURE_DIM],
    /// Fewer than three peaks were available; missing slots are zero.
    pub padded: bool,
}

pub fn feature_vector<T: Real>(peaks: &PeakSet<T>, spectrum: &BreathSpectrum<T>) -> FeatureVector<T> {
    let mut v = [T::zero(); FEATURE_DIM];
    for (i, p) in peaks.top(FEATURE_PEAKS).iter().enumerate() {
        v[i] = p.rate_bpm;
        v[FEATURE_PEAKS + i] = p.power.ln_1p();
        v[2 * FEATURE_PEAKS + i] = p.cm.min(T::lit(CM_FEATURE_CAP));
    }
    v[9] = cm_weighted(peaks, FEATURE_PEAKS).unwrap_or(T::zero());
    v[10] = power_weighted(spectrum).unwrap_or(T::zero());
    v[11] = power_peaks_weighted(peaks, FEATURE_PEAKS).unwrap_or(T::zero());
    FeatureVector {
        values: v,
        padded: peaks.len() < FEATURE_PEAKS,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::peaks::find_peaks;

    #[test]
    fn zero_spectrum_gives_padded_zero_vector() {
        let s = BreathSpectrum::from_power(vec![0.0f64; 513], 20.0, 1024).unwrap();
        let f = feature_vector(&find_peaks(&s, 4), &s);
        assert!(f.padded);
        assert!(f.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn permuting_far_noise_keeps_features() {
        // three isolated peaks with noise far from their CM windows
        let mut p = vec![0.0f64; 80];
        for (c, h) in [(12usize, 100.0), (25, 60.0), (38, 30.0)] {
            p[c] = h;
            p[c - 1] = h / 2.0;
            p[c + 1] = h / 2.0;
        }
        // sub-threshold noise pairs at (50, 51) and (60, 61) holding (a, b) and (b, a)
        let (a, b) = (0.7, 0.2);
        let mut q = p.clone();
        p[50] = a;
        p[51] = b;
        p[60] = b;
        p[61] = a;
        q[50] = b;
        q[51] = a;
        q[60] = a;
        q[61] = b;
        let s1 = BreathSpectrum::from_power(p, 20.0, 1024).unwrap();
        let s2 = BreathSpectrum::from_power(q, 20.0, 1024).unwrap();
        let f1 = feature_vector(&find_peaks(&s1, 4), &s1);
        let f2 = feature_vector(&find_peaks(&s2, 4), &s2);
        for (x, y) in f1.values.iter().zip(&f2.values) {
            assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0), "{x} vs {y}");
        }
        assert!(!f1.padded);
    }
}
