//! Adaptive peak selection feeding a scalar Kalman filter.
//!
//! The measurement is the peak with the highest confidence metric, and the
//! measurement variance shrinks as that confidence grows.

use std::cmp::Ordering;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Real;
use crate::spectral::{Peak, PeakSet};
use crate::synthesis::config::RATE_BAND_BPM;

/// Peaks whose power enters the dominance ratio.
pub const DOMINANCE_POOL: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackConfig {
    pub process_noise_q: f64,
    pub r_scale_c: f64,
    pub dominance_threshold: f64,
    pub r_floor: f64,
    pub r_ceiling: f64,
    /// Measure the power-dominant peak instead of the highest-CM one when
    /// the dominance rule fires.
    pub dominant_power_override: bool,
}

impl Default for TrackConfig {
    fn default() -> Self {
        Self {
            process_noise_q: 0.05,
            r_scale_c: 4.0,
            dominance_threshold: 0.5,
            r_floor: 0.25,
            r_ceiling: 400.0,
            dominant_power_override: false,
        }
    }
}

impl TrackConfig {
    pub fn validate(&self) -> Result<()> {
        let finite_pos = |v: f64| v.is_finite() && v > 0.0;
        if !(self.process_noise_q.is_finite() && self.process_noise_q >= 0.0) {
            return Err(Error::Config(format!(
                "process_noise_q must be ≥ 0, got {}",
                self.process_noise_q
            )));
        }
        if !finite_pos(self.r_scale_c) || !finite_pos(self.r_floor) || !finite_pos(self.r_ceiling) {
            return Err(Error::Config(
                "r_scale_c, r_floor and r_ceiling must be positive".into(),
            ));
        }
        if self.r_floor > self.r_ceiling {
            return Err(Error::Config("r_floor exceeds r_ceiling".into()));
        }
        if !(self.dominance_threshold > 0.0 && self.dominance_threshold < 1.0) {
            return Err(Error::Config("dominance_threshold must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrackState<T> {
    pub rate_bpm: T,
    pub variance: T,
    pub initialized: bool,
}

impl<T: Real> TrackState<T> {
    pub fn new() -> Self {
        Self {
            rate_bpm: T::zero(),
            variance: T::zero(),
            initialized: false,
        }
    }
}

/// Descending CM, then descending power, then ascending rate.
fn cm_order<T: Real>(a: &Peak<T>, b: &Peak<T>) -> Ordering {
    b.cm.partial_cmp(&a.cm)
        .unwrap_or(Ordering::Equal)
        .then(b.power.partial_cmp(&a.power).unwrap_or(Ordering::Equal))
        .then(a.rate_bpm.partial_cmp(&b.rate_bpm).unwrap_or(Ordering::Equal))
}

fn by_cm<T: Real>(peaks: &PeakSet<T>) -> Vec<&Peak<T>> {
    let mut v: Vec<&Peak<T>> = peaks.peaks.iter().collect();
    v.sort_by(|a, b| cm_order(a, b));
    v
}

/// Rate and CM of the highest-confidence peak.
pub fn select_measurement<T: Real>(peaks: &PeakSet<T>) -> Result<(T, T)> {
    by_cm(peaks)
        .first()
        .map(|p| (p.rate_bpm, p.cm))
        .ok_or(Error::NoEstimate("empty peak set"))
}

/// Outcome of the dominance rule over the two highest-CM peaks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceSummary<T> {
    pub effective_cm: T,
    /// Index into the peak set of the power-dominant leader, if any.
    pub dominant: Option<usize>,
}

pub fn effective_confidence<T: Real>(peaks: &PeakSet<T>, config: &TrackConfig) -> Result<ConfidenceSummary<T>> {
    let ranked = by_cm(peaks);
    let (a, b) = match ranked.as_slice() {
        [] => return Err(Error::NoEstimate("empty peak set")),
        [only] => {
            return Ok(ConfidenceSummary {
                effective_cm: only.cm,
                dominant: None,
            })
        }
        [a, b, ..] => (*a, *b),
    };
    let pool: T = peaks.top(DOMINANCE_POOL).iter().map(|p| p.power).sum();
    if !(pool > T::zero()) {
        return Ok(ConfidenceSummary {
            effective_cm: a.cm,
            dominant: None,
        });
    }
    let (ra, rb) = (a.power / pool, b.power / pool);
    let threshold = T::lit(config.dominance_threshold);
    if ra.max(rb) > threshold {
        let lead = if ra >= rb { a } else { b };
        let dominant = peaks.peaks.iter().position(|p| std::ptr::eq(p, lead));
        return Ok(ConfidenceSummary {
            effective_cm: a.cm,
            dominant,
        });
    }
    if a.cm.is_infinite() {
        return Ok(ConfidenceSummary {
            effective_cm: a.cm,
            dominant: None,
        });
    }
    let effective_cm = if ra + rb > T::zero() {
        (a.cm * ra + b.cm * rb) / (ra + rb)
    } else {
        a.cm
    };
    Ok(ConfidenceSummary {
        effective_cm,
        dominant: None,
    })
}

fn variance_from_cm<T: Real>(cm: T, config: &TrackConfig) -> T {
    let (floor, ceiling) = (T::lit(config.r_floor), T::lit(config.r_ceiling));
    if !(cm > T::zero()) {
        return ceiling;
    }
    (T::lit(config.r_scale_c) / cm).max(floor).min(ceiling)
}

/// Measurement variance derived from the confidence of the leading peaks.
#[allow(non_snake_case)]
pub fn estimate_R<T: Real>(peaks: &PeakSet<T>, config: &TrackConfig) -> Result<T> {
    Ok(variance_from_cm(
        effective_confidence(peaks, config)?.effective_cm,
        config,
    ))
}

pub fn kalman_predict<T: Real>(state: TrackState<T>, config: &TrackConfig) -> TrackState<T> {
    TrackState {
        variance: state.variance + T::lit(config.process_noise_q),
        ..state
    }
}

/// Gain used by [`kalman_update`], for tracing.
pub fn kalman_gain<T: Real>(variance: T, r: T) -> T {
    if r.is_infinite() {
        T::zero()
    } else {
        variance / (variance + r)
    }
}

pub fn kalman_update<T: Real>(state: TrackState<T>, z: T, r: T) -> TrackState<T> {
    if !z.is_finite() || !(r > T::zero()) {
        return state;
    }
    let k = kalman_gain(state.variance, r);
    let x = state.rate_bpm + k * (z - state.rate_bpm);
    TrackState {
        rate_bpm: x.max(T::lit(RATE_BAND_BPM.0)).min(T::lit(RATE_BAND_BPM.1)),
        variance: (T::one() - k) * state.variance,
        initialized: true,
    }
}

/// What happened inside one [`track_step`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepTrace<T> {
    pub z: Option<T>,
    pub cm_max: Option<T>,
    pub r: Option<T>,
    pub gain: Option<T>,
    pub rate_bpm: T,
    pub variance: T,
    /// No measurement this step; the estimate is carried forward.
    pub stale: bool,
}

/// Predict, select, weigh and update. The first valid measurement
/// initializes the state outright.
pub fn track_step<T: Real>(
    state: TrackState<T>,
    peaks: &PeakSet<T>,
    config: &TrackConfig,
) -> (TrackState<T>, StepTrace<T>) {
    let predicted = if state.initialized {
        kalman_predict(state, config)
    } else {
        state
    };
    let stale = |s: TrackState<T>| StepTrace {
        z: None,
        cm_max: None,
        r: None,
        gain: None,
        rate_bpm: s.rate_bpm,
        variance: s.variance,
        stale: true,
    };
    let Ok(summary) = effective_confidence(peaks, config) else {
        return (predicted, stale(predicted));
    };
    let Ok((mut z, cm_max)) = select_measurement(peaks) else {
        return (predicted, stale(predicted));
    };
    if config.dominant_power_override {
        if let Some(i) = summary.dominant {
            z = peaks.peaks[i].rate_bpm;
        }
    }
    if !z.is_finite() {
        return (predicted, stale(predicted));
    }
    let r = variance_from_cm(summary.effective_cm, config);
    let (next, gain) = if predicted.initialized {
        (kalman_update(predicted, z, r), kalman_gain(predicted.variance, r))
    } else {
        let x = z.max(T::lit(RATE_BAND_BPM.0)).min(T::lit(RATE_BAND_BPM.1));
        (
            TrackState {
                rate_bpm: x,
                variance: r,
                initialized: true,
            },
            T::one(),
        )
    };
    let trace = StepTrace {
        z: Some(z),
        cm_max: Some(cm_max),
        r: Some(r),
        gain: Some(gain),
        rate_bpm: next.rate_bpm,
        variance: next.variance,
        stale: false,
    };
    (next, trace)
}

/// Runs the tracker over a sequence of peak sets.
#[derive(Debug, Clone)]
pub struct Tracker<T> {
    pub config: TrackConfig,
    pub state: TrackState<T>,
    pub steps: usize,
}

impl<T: Real> Tracker<T> {
    pub fn new(config: TrackConfig) -> Self {
        Self {
            config,
            state: TrackState::new(),
            steps: 0,
        }
    }

    pub fn step(&mut self, peaks: &PeakSet<T>) -> StepTrace<T> {
        let (s, trace) = track_step(self.state, peaks, &self.config);
        self.state = s;
        self.steps += 1;
        trace
    }
}

/// Writes per-step filter traces as `step,z,cm_max,r,k,x,p`; missing values
/// are left empty.
pub fn write_trace_csv<T: Real, W: Write>(traces: &[StepTrace<T>], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["step", "z", "cm_max", "r", "k", "x", "p"])?;
    let opt = |v: Option<T>| v.map(|v| v.to_f64_lossy().to_string()).unwrap_or_default();
    for (i, t) in traces.iter().enumerate() {
        w.write_record([
            i.to_string(),
            opt(t.z),
            opt(t.cm_max),
            opt(t.r),
            opt(t.gain),
            t.rate_bpm.to_f64_lossy().to_string(),
            t.variance.to_f64_lossy().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn peak(rate: f64, power: f64, cm: f64) -> Peak<f64> {
        Peak {
            rate_bpm: rate,
            power,
            cm,
            bin_index: (rate / 1.171875).round() as usize,
        }
    }

    fn fig_a() -> PeakSet<f64> {
        PeakSet::from_peaks(
            vec![
                peak(8.203125, 30512554967040.0, 2.5836),
                peak(17.578125, 20822039199744.0, 10.3253),
                peak(28.125, 14592173408256.0, 0.94183),
                peak(42.1875, 1099941543936.0, 0.06066),
            ],
            4,
        )
    }

    fn fig_b() -> PeakSet<f64> {
        PeakSet::from_peaks(
            vec![
                peak(21.09375, 28965970378752.0, 5.4523),
                peak(43.359375, 1586389450752.0, 0.088355),
                peak(38.671875, 1425529765888.0, 0.16718),
                peak(14.0625, 920767823872.0, 5.5883),
            ],
            4,
        )
    }

    #[test]
    fn measurement_is_max_cm() {
        assert_eq!(select_measurement(&fig_a()).unwrap(), (17.578125, 10.3253));
        assert_eq!(select_measurement(&fig_b()).unwrap(), (14.0625, 5.5883));
        let one = PeakSet::from_peaks(vec![peak(30.0, 1.0, 0.2)], 4);
        assert_eq!(select_measurement(&one).unwrap().0, 30.0);
        assert!(select_measurement(&PeakSet::<f64>::empty(4)).is_err());
    }

    #[test]
    fn measurement_ties() {
        let set = PeakSet::from_peaks(vec![peak(10.0, 1.0, 3.0), peak(20.0, 2.0, 3.0)], 4);
        assert_eq!(select_measurement(&set).unwrap().0, 20.0);
        let set = PeakSet::from_peaks(vec![peak(25.0, 2.0, 3.0), peak(12.0, 2.0, 3.0)], 4);
        assert_eq!(select_measurement(&set).unwrap().0, 12.0);
    }

    #[test]
    fn measurement_variance_examples() {
        let cfg = TrackConfig::default();
        let a = effective_confidence(&fig_a(), &cfg).unwrap();
        assert_relative_eq!(a.effective_cm, 5.7237, epsilon = 1e-3);
        assert_relative_eq!(estimate_R(&fig_a(), &cfg).unwrap(), 0.699, epsilon = 1e-3);
        let b = effective_confidence(&fig_b(), &cfg).unwrap();
        assert_eq!(b.effective_cm, 5.5883);
        assert_relative_eq!(estimate_R(&fig_b(), &cfg).unwrap(), 4.0 / 5.5883, epsilon = 1e-12);
        let eq = PeakSet::from_peaks(
            vec![peak(10.0, 1.0, 2.5), peak(20.0, 1.0, 2.5), peak(30.0, 1.0, 0.1)],
            4,
        );
        assert_eq!(effective_confidence(&eq, &cfg).unwrap().effective_cm, 2.5);
        let zero = PeakSet::from_peaks(vec![peak(10.0, 1.0, 0.0)], 4);
        assert_eq!(estimate_R(&zero, &cfg).unwrap(), 400.0);
    }

    #[test]
    fn override_measures_dominant_peak() {
        let cfg = TrackConfig {
            dominant_power_override: true,
            ..Default::default()
        };
        let (s, t) = track_step(TrackState::new(), &fig_b(), &cfg);
        assert_eq!(s.rate_bpm, 21.09375);
        assert_eq!(t.cm_max, Some(5.5883));
        // no dominance in Fig. 3a-style peaks: measurement unchanged
        let (s, _) = track_step(TrackState::new(), &fig_a(), &cfg);
        assert_eq!(s.rate_bpm, 17.578125);
    }

    #[test]
    fn predict_examples() {
        let cfg = TrackConfig::default();
        let s = TrackState {
            rate_bpm: 15.0,
            variance: 1.0,
            initialized: true,
        };
        let p = kalman_predict(s, &cfg);
        assert_eq!(p.rate_bpm, 15.0);
        assert_relative_eq!(p.variance, 1.05);
        let zero_q = TrackConfig {
            process_noise_q: 0.0,
            ..cfg
        };
        assert_eq!(kalman_predict(s, &zero_q), s);
    }

    #[test]
    fn update_examples() {
        let s = TrackState {
            rate_bpm: 15.0f64,
            variance: 1.0,
            initialized: true,
        };
        let u = kalman_update(s, 20.0, 1.0);
        assert_eq!((u.rate_bpm, u.variance), (17.5, 0.5));
        assert!((kalman_update(s, 20.0, 1e12).rate_bpm - 15.0).abs() < 1e-9);
        assert!((kalman_update(s, 20.0, 1e-12).rate_bpm - 20.0).abs() < 1e-9);
        assert_eq!(kalman_update(s, f64::NAN, 1.0), s);
        assert_eq!(kalman_update(s, 90.0, 1e-9).rate_bpm, 50.0);
    }

    #[test]
    fn first_measurement_initializes() {
        let cfg = TrackConfig::default();
        let (s, t) = track_step(TrackState::new(), &fig_b(), &cfg);
        assert!(s.initialized);
        assert_eq!(s.rate_bpm, 14.0625);
        assert_eq!(s.variance, estimate_R(&fig_b(), &cfg).unwrap());
        assert!(!t.stale);
    }

    #[test]
    fn empty_steps_go_stale() {
        let cfg = TrackConfig::default();
        let (mut s, _) = track_step(TrackState::new(), &fig_a(), &cfg);
        let start = s;
        for _ in 0..30 {
            let (n, t) = track_step(s, &PeakSet::empty(4), &cfg);
            assert!(t.stale);
            s = n;
        }
        assert_eq!(s.rate_bpm, start.rate_bpm);
        assert_relative_eq!(s.variance, start.variance + 30.0 * 0.05, epsilon = 1e-12);
        // uninitialized and empty: stays uninitialized
        let (u, t) = track_step(TrackState::<f64>::new(), &PeakSet::empty(4), &cfg);
        assert!(!u.initialized && t.stale);
    }

    #[test]
    fn trace_csv_has_header_and_rows() {
        let mut tr = Tracker::new(TrackConfig::default());
        let traces = vec![tr.step(&fig_a()), tr.step(&PeakSet::empty(4)), tr.step(&fig_b())];
        let mut buf = Vec::new();
        write_trace_csv(&traces, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "step,z,cm_max,r,k,x,p");
        assert_eq!(lines.len(), 4);
        assert!(lines[2].starts_with("1,,,,,"));
    }

    #[test]
    fn config_validation() {
        assert!(TrackConfig::default().validate().is_ok());
        assert!(TrackConfig {
            dominance_threshold: 1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(TrackConfig {
            r_floor: 500.0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }

    proptest! {
        #[test]
        fn update_contracts(x in 6.0f64..50.0, p in 1e-3f64..100.0, z in 6.0f64..50.0, r in 1e-3f64..400.0) {
            let s = TrackState { rate_bpm: x, variance: p, initialized: true };
            let u = kalman_update(s, z, r);
            prop_assert!(u.variance > 0.0 && u.variance < p);
            prop_assert!((u.rate_bpm - z).abs() <= (x - z).abs() + 1e-12);
        }

        #[test]
        fn variance_stays_positive(steps in prop::collection::vec((6.0f64..50.0, 0.25f64..400.0), 1..50)) {
            let cfg = TrackConfig::default();
            let mut s = TrackState { rate_bpm: 20.0, variance: 1.0, initialized: true };
            for (z, r) in steps {
                s = kalman_update(kalman_predict(s, &cfg), z, r);
                prop_assert!(s.variance > 0.0);
            }
        }

        #[test]
        fn converges_to_constant_measurement(x0 in 6.0f64..50.0, z in 6.0f64..50.0, q in 0.0f64..0.05, r in 0.25f64..4.0) {
            let cfg = TrackConfig { process_noise_q: q, ..Default::default() };
            let mut s = TrackState { rate_bpm: x0, variance: r, initialized: true };
            let mut prev = (x0 - z).abs();
            for _ in 0..100 {
                s = kalman_update(kalman_predict(s, &cfg), z, r);
                let d = (s.rate_bpm - z).abs();
                prop_assert!(d <= prev + 1e-12);
                prev = d;
            }
            prop_assert!(prev <= 0.01 * (x0 - z).abs() + 1e-12);
        }

        #[test]
        fn r_decreases_with_confidence(c1 in 1e-3f64..100.0, c2 in 1e-3f64..100.0) {
            let cfg = TrackConfig::default();
            let (lo, hi) = if c1 < c2 { (c1, c2) } else { (c2, c1) };
            prop_assume!(hi - lo > 1e-9);
            let ra = variance_from_cm(lo, &cfg);
            let rb = variance_from_cm(hi, &cfg);
            prop_assert!(rb <= ra);
            if ra > cfg.r_floor && ra < cfg.r_ceiling {
                prop_assert!(rb < ra);
            }
        }
    }
}
