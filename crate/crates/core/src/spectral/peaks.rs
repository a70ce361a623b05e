//! Local maxima of the breath spectrum and their confidence metric.

use std::cmp::Ordering;

use super::spectrum::BreathSpectrum;
use crate::num::Real;

/// Bins on each side of a peak counted as "its" power.
pub const CM_HALF_WINDOW: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak<T> {
    pub rate_bpm: T,
    pub power: T,
    pub cm: T,
    pub bin_index: usize,
}

/// Peaks ordered by descending power; equal powers put the lower rate first.
#[derive(Debug, Clone, PartialEq)]
pub struct PeakSet<T> {
    pub peaks: Vec<Peak<T>>,
    pub k: usize,
}

pub(crate) fn power_order<T: Real>(a: &Peak<T>, b: &Peak<T>) -> Ordering {
    b.power
        .partial_cmp(&a.power)
        .unwrap_or(Ordering::Equal)
        .then(a.rate_bpm.partial_cmp(&b.rate_bpm).unwrap_or(Ordering::Equal))
}

impl<T: Real> PeakSet<T> {
    /// Builds a set from arbitrary peaks, sorting and truncating to `k`.
    pub fn from_peaks(mut peaks: Vec<Peak<T>>, k: usize) -> Self {
        peaks.sort_by(power_order);
        peaks.truncate(k);
        Self { peaks, k }
    }

    pub fn empty(k: usize) -> Self {
        Self { peaks: Vec::new(), k }
    }

    pub fn len(&self) -> usize {
        self.peaks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.peaks.is_empty()
    }

    /// The `n` strongest peaks (fewer if not available).
    pub fn top(&self, n: usize) -> &[Peak<T>] {
        &self.peaks[..n.min(self.peaks.len())]
    }

    pub fn rates(&self) -> Vec<T> {
        self.peaks.iter().map(|p| p.rate_bpm).collect()
    }
}

/// Window power around `bin` over the power everywhere else.
///
/// The window is clipped at the spectrum edges. When the window holds all of
/// the power the ratio is reported as `+∞`.
pub fn confidence_metric_at<T: Real>(spectrum: &BreathSpectrum<T>, bin: usize, half_window: usize) -> T {
    let p = &spectrum.power;
    if p.is_empty() {
        return T::zero();
    }
    let lo = bin.saturating_sub(half_window);
    let hi = (bin + half_window).min(p.len() - 1);
    let inside: T = p[lo..=hi].iter().copied().sum();
    // Summing the outside directly avoids cancellation in total − inside.
    let outside: T = p[..lo].iter().chain(&p[hi + 1..]).copied().sum();
    if outside <= T::zero() {
        T::infinity()
    } else {
        inside / outside
    }
}

pub fn confidence_metric<T: Real>(spectrum: &BreathSpectrum<T>, peak: &Peak<T>, half_window: usize) -> T {
    confidence_metric_at(spectrum, peak.bin_index, half_window)
}

/// In-band local maxima: strictly above the left neighbour and strictly above
/// the first differing right neighbour; a plateau reports its leftmost bin.
pub fn local_maxima<T: Real>(spectrum: &BreathSpectrum<T>) -> Vec<usize> {
    let p = &spectrum.power;
    let mut out = Vec::new();
    let mut i = 1;
    while i + 1 < p.len() {
        if p[i] > p[i - 1] {
            let mut j = i;
            while j + 1 < p.len() && p[j + 1] == p[i] {
                j += 1;
            }
            if j + 1 < p.len() && p[j + 1] < p[i] && spectrum.in_band(i) {
                out.push(i);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

/// Top-`k` in-band peaks with their confidence metrics.
pub fn find_peaks<T: Real>(spectrum: &BreathSpectrum<T>, k: usize) -> PeakSet<T> {
    find_peaks_with(spectrum, k, CM_HALF_WINDOW)
}

pub fn find_peaks_with<T: Real>(spectrum: &BreathSpectrum<T>, k: usize, half_window: usize) -> PeakSet<T> {
    let peaks = local_maxima(spectrum)
        .into_iter()
        .map(|bin| Peak {
            rate_bpm: spectrum.rate_of(bin),
            power: spectrum.power[bin],
            cm: T::zero(),
            bin_index: bin,
        })
        .collect();
    let mut set = PeakSet::from_peaks(peaks, k);
    for p in &mut set.peaks {
        p.cm = confidence_metric(spectrum, p, half_window);
    }
    set
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn spec(power: Vec<f64>) -> BreathSpectrum<f64> {
        BreathSpectrum::from_power(power, 20.0, 1024).unwrap()
    }

    #[test]
    fn half_power_window_gives_unit_cm() {
        let mut p = vec![1.0; 40];
        // window 15..=25 holds 11 units; put 18 more units inside to reach 29 = the outside sum
        p[20] += 18.0;
        let s = spec(p);
        assert_relative_eq!(confidence_metric_at(&s, 20, 5), 1.0);
    }

    #[test]
    fn uniform_spectrum_cm() {
        let s = spec(vec![3.0; 100]);
        assert_relative_eq!(confidence_metric_at(&s, 50, 5), 11.0 / 89.0, max_relative = 1e-12);
    }

    #[test]
    fn single_bin_is_infinite() {
        let mut p = vec![0.0; 30];
        p[12] = 5.0;
        assert!(confidence_metric_at(&spec(p), 12, 5).is_infinite());
    }

    #[test]
    fn window_clips_at_edges() {
        let s = spec(vec![1.0; 20]);
        // bins 0..=5 inside, 14 outside
        assert_relative_eq!(confidence_metric_at(&s, 0, 5), 6.0 / 14.0);
    }

    #[test]
    fn monotone_spectrum_has_no_peaks() {
        let s = spec((0..60).map(|i| i as f64).collect());
        assert!(find_peaks(&s, 4).is_empty());
        let s = spec((0..60).map(|i| 100.0 - i as f64).collect());
        assert!(find_peaks(&s, 4).is_empty());
    }

    #[test]
    fn plateau_reports_leftmost_bin() {
        let mut p = vec![0.0; 40];
        p[10] = 2.0;
        p[11] = 5.0;
        p[12] = 5.0;
        p[13] = 5.0;
        p[14] = 1.0;
        let set = find_peaks(&spec(p), 3);
        assert_eq!(set.len(), 1);
        assert_eq!(set.peaks[0].bin_index, 11);
    }

    #[test]
    fn out_of_band_maxima_are_ignored() {
        let mut p = vec![0.0; 60];
        p[3] = 9.0; // 3.5 bpm
        p[20] = 1.0;
        let set = find_peaks(&spec(p), 4);
        assert_eq!(set.peaks.iter().map(|q| q.bin_index).collect::<Vec<_>>(), vec![20]);
    }

    #[test]
    fn cm_grows_with_window_power() {
        let base: Vec<f64> = (0..80).map(|i| 1.0 + ((i * 37) % 11) as f64).collect();
        let s = spec(base.clone());
        let before = confidence_metric_at(&s, 30, 5);
        let mut bumped = base;
        bumped[33] += 4.0;
        assert!(confidence_metric_at(&spec(bumped), 30, 5) > before);
    }

    /// Exhaustive oracle: every bin compared against every plateau shape.
    fn oracle(power: &[f64], band_bins: std::ops::RangeInclusive<usize>, k: usize) -> Vec<usize> {
        let mut cands = Vec::new();
        for i in 1..power.len().saturating_sub(1) {
            if !band_bins.contains(&i) || !(power[i] > power[i - 1]) {
                continue;
            }
            let right = (i + 1..power.len()).find(|&j| power[j] != power[i]);
            if let Some(j) = right {
                if power[j] < power[i] {
                    cands.push(i);
                }
            }
        }
        cands.sort_by(|&a, &b| power[b].partial_cmp(&power[a]).unwrap().then(a.cmp(&b)));
        cands.truncate(k);
        cands
    }

    proptest! {
        #[test]
        fn matches_exhaustive_scan(
            power in prop::collection::vec(prop_oneof![Just(0.0), Just(1.0), Just(2.0), 0.0f64..10.0], 1..=64),
            k in 1usize..=8,
        ) {
            let s = spec(power.clone());
            let band = (0..power.len()).filter(|&i| s.in_band(i)).collect::<Vec<_>>();
            let expected = match (band.first(), band.last()) {
                (Some(&a), Some(&b)) => oracle(&power, a..=b, k),
                _ => vec![],
            };
            let got: Vec<usize> = find_peaks(&s, k).peaks.iter().map(|p| p.bin_index).collect();
            prop_assert_eq!(got, expected);
        }

        #[test]
        fn cm_is_scale_invariant(power in prop::collection::vec(0.0f64..1e6, 12..80), c in 1e-6f64..1e6, bin in 0usize..12) {
            let s = spec(power);
            let a = confidence_metric_at(&s, bin, 5);
            let b = confidence_metric_at(&s.scaled(c), bin, 5);
            if a.is_finite() {
                prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300));
            } else {
                prop_assert!(b.is_infinite());
            }
        }
    }
}
