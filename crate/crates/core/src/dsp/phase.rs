//! Slow-time phase of the tracked range bin.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::num::{wrap_angle, Real};

/// Uniformly sampled slow-time phase, radians.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSignal<T> {
    pub samples: Vec<T>,
    pub sample_rate_hz: T,
    pub origin_bin: usize,
}

impl<T: Real> PhaseSignal<T> {
    pub fn new(samples: Vec<T>, sample_rate_hz: T, origin_bin: usize) -> Self {
        Self {
            samples,
            sample_rate_hz,
            origin_bin,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> T {
        T::from_usize_lossy(self.samples.len()) / self.sample_rate_hz
    }
}

/// Wrapped phase plus the number of zero-magnitude samples whose phase was
/// carried forward from the previous sample.
#[derive(Debug, Clone, PartialEq)]
pub struct WrappedPhase<T> {
    pub signal: PhaseSignal<T>,
    pub zero_magnitude_samples: usize,
}

/// Four-quadrant angle normalized into `(-π, π]`.
#[inline]
pub fn angle<T: Real>(z: Complex<T>) -> T {
    let a = z.im.atan2(z.re);
    if a <= -T::PI() {
        T::PI()
    } else {
        a
    }
}

pub fn extract_phase<T: Real>(
    bin_series: &[Complex<T>],
    sample_rate_hz: T,
    origin_bin: usize,
) -> Result<WrappedPhase<T>> {
    if bin_series.is_empty() {
        return Err(Error::InvalidInput("empty bin series".into()));
    }
    let mut zeros = 0;
    let mut prev = T::zero();
    let samples = bin_series
        .iter()
        .map(|&z| {
            if z.re == T::zero() && z.im == T::zero() {
                zeros += 1;
            } else {
                prev = angle(z);
            }
            prev
        })
        .collect();
    Ok(WrappedPhase {
        signal: PhaseSignal::new(samples, sample_rate_hz, origin_bin),
        zero_magnitude_samples: zeros,
    })
}

/// Streaming unwrapper. The output is the input plus an integer multiple of
/// 2π chosen so that successive differences fall in `(-π, π]`.
#[derive(Debug, Clone, Default)]
pub struct PhaseUnwrapper<T> {
    prev: Option<T>,
    turns: i64,
}

impl<T: Real> PhaseUnwrapper<T> {
    pub fn new() -> Self {
        Self { prev: None, turns: 0 }
    }

    pub fn push(&mut self, x: T) -> T {
        if let Some(p) = self.prev {
            let d = x - p;
            let correction = wrap_angle(d) - d;
            self.turns += (correction / T::TAU()).round().to_i64().unwrap_or(0);
        }
        self.prev = Some(x);
        x + T::TAU() * T::lit(self.turns as f64)
    }
}

pub fn unwrap_phase<T: Real>(wrapped: &PhaseSignal<T>) -> PhaseSignal<T> {
    let mut u = PhaseUnwrapper::new();
    PhaseSignal {
        samples: wrapped.samples.iter().map(|&x| u.push(x)).collect(),
        sample_rate_hz: wrapped.sample_rate_hz,
        origin_bin: wrapped.origin_bin,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn sig(v: Vec<f64>) -> PhaseSignal<f64> {
        PhaseSignal::new(v, 20.0, 0)
    }

    #[test]
    fn constant_series() {
        let p = extract_phase(&[Complex::new(1.0, 0.0); 10], 20.0, 3).unwrap();
        assert!(p.signal.samples.iter().all(|&x| x == 0.0));
        assert_eq!(p.signal.origin_bin, 3);
        let p = extract_phase(&[Complex::new(0.0, 1.0); 10], 20.0, 0).unwrap();
        assert!(p.signal.samples.iter().all(|&x| x == FRAC_PI_2));
    }

    #[test]
    fn ramp_wraps_into_half_open_interval() {
        let series: Vec<_> = (0..100).map(|k| Complex::from_polar(1.0, 0.1 * k as f64)).collect();
        let p = extract_phase(&series, 20.0, 0).unwrap().signal;
        for (k, &x) in p.samples.iter().enumerate() {
            // analytic: 0.1k mod 2π mapped to (-π, π]
            let mut expect = (0.1 * k as f64).rem_euclid(2.0 * PI);
            if expect > PI {
                expect -= 2.0 * PI;
            }
            assert_abs_diff_eq!(x, expect, epsilon = 1e-9);
            assert!(x > -PI && x <= PI);
        }
    }

    #[test]
    fn negative_real_axis_maps_to_plus_pi() {
        assert_eq!(angle(Complex::new(-1.0, -0.0)), PI);
        assert_eq!(angle(Complex::new(-1.0, 0.0)), PI);
    }

    #[test]
    fn zero_magnitude_carries_previous_phase() {
        let s = [Complex::new(0.0, 1.0), Complex::new(0.0, 0.0), Complex::new(1.0, 0.0)];
        let p = extract_phase(&s, 20.0, 0).unwrap();
        assert_eq!(p.signal.samples, vec![FRAC_PI_2, FRAC_PI_2, 0.0]);
        assert_eq!(p.zero_magnitude_samples, 1);
        assert!(extract_phase::<f64>(&[], 20.0, 0).is_err());
    }

    #[test]
    fn unwrap_examples() {
        let u = unwrap_phase(&sig(vec![PI - 0.1, -PI + 0.1]));
        assert_abs_diff_eq!(u.samples[0], PI - 0.1);
        assert_abs_diff_eq!(u.samples[1], PI + 0.1, epsilon = 1e-12);
        let c = sig(vec![0.3; 17]);
        assert_eq!(unwrap_phase(&c), c);
        let wrapped: Vec<f64> = (0..200).map(|k| wrap_angle(0.5 * k as f64)).collect();
        let u = unwrap_phase(&sig(wrapped));
        for (k, &x) in u.samples.iter().enumerate() {
            assert_abs_diff_eq!(x, 0.5 * k as f64, epsilon = 1e-9);
        }
    }

    proptest! {
        #[test]
        fn unwrapped_differences_are_in_half_open_pi(v in prop::collection::vec(-PI..=PI, 2..200)) {
            let u = unwrap_phase(&sig(v.clone()));
            prop_assert_eq!(u.samples[0], v[0]);
            for w in u.samples.windows(2) {
                let d = w[1] - w[0];
                prop_assert!(d > -PI - 1e-9 && d <= PI + 1e-9);
            }
            for (a, b) in u.samples.iter().zip(&v) {
                let turns = (a - b) / (2.0 * PI);
                prop_assert!((turns - turns.round()).abs() < 1e-9);
            }
        }
    }
}
