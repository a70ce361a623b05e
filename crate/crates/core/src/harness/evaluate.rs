//! Belt-style ground truth and error statistics.

use serde::{Deserialize, Serialize};

use super::pipeline::EstimateRecord;
use crate::error::{Error, Result};
use crate::synthesis::TruthRecord;

/// Averaging window of the reference belt, seconds.
pub const BELT_WINDOW_S: f64 = 10.0;
/// Largest time difference accepted when pairing an estimate with truth.
pub const MAX_ALIGN_SKEW_S: f64 = 0.5;
/// Histogram bin width for the MAE and std tables, bpm.
pub const HIST_BIN_BPM: f64 = 0.5;

/// Reference rate per time, smoothed like a respiration belt.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GroundTruthSeries {
    pub times_s: Vec<f64>,
    pub rates_bpm: Vec<f64>,
}

impl GroundTruthSeries {
    /// Trailing [`BELT_WINDOW_S`] mean of the instantaneous rate.
    pub fn from_truth(truth: &[TruthRecord], frame_rate_hz: f64) -> Self {
        let span = ((BELT_WINDOW_S * frame_rate_hz).round() as usize).max(1);
        let mut acc = 0.0;
        let mut rates = Vec::with_capacity(truth.len());
        for (i, r) in truth.iter().enumerate() {
            acc += r.breath_rate_bpm;
            if i >= span {
                acc -= truth[i - span].breath_rate_bpm;
            }
            rates.push(acc / (i + 1).min(span) as f64);
        }
        Self {
            times_s: (0..truth.len()).map(|i| i as f64 / frame_rate_hz).collect(),
            rates_bpm: rates,
        }
    }

    pub fn len(&self) -> usize {
        self.times_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times_s.is_empty()
    }

    /// Truth rate nearest to `t`, if within the alignment tolerance.
    pub fn at(&self, t: f64) -> Option<f64> {
        let i = self.times_s.partition_point(|&x| x < t);
        [i.checked_sub(1), (i < self.len()).then_some(i)]
            .into_iter()
            .flatten()
            .map(|j| ((self.times_s[j] - t).abs(), j))
            .filter(|(d, _)| *d <= MAX_ALIGN_SKEW_S)
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .map(|(_, j)| self.rates_bpm[j])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateCategory {
    Low,
    Mid,
    High,
}

impl RateCategory {
    pub const ALL: [RateCategory; 3] = [RateCategory::Low, RateCategory::Mid, RateCategory::High];

    /// Inclusive bounds in whole bpm.
    pub fn bounds(self) -> (u32, u32) {
        match self {
            RateCategory::Low => (6, 14),
            RateCategory::Mid => (15, 24),
            RateCategory::High => (25, 36),
        }
    }

    /// Category of a true rate rounded to whole bpm; `None` outside 6–36.
    pub fn of(rate_bpm: f64) -> Option<Self> {
        let r = rate_bpm.round();
        Self::ALL.into_iter().find(|c| {
            let (lo, hi) = c.bounds();
            r >= lo as f64 && r <= hi as f64
        })
    }

    fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ErrorSum {
    pub abs_error_sum: f64,
    pub samples: usize,
}

impl ErrorSum {
    pub fn mae(&self) -> Option<f64> {
        (self.samples > 0).then(|| self.abs_error_sum / self.samples as f64)
    }

    fn add(&mut self, other: &ErrorSum) {
        self.abs_error_sum += other.abs_error_sum;
        self.samples += other.samples;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectReport {
    pub subject: String,
    pub mae: f64,
    /// Population standard deviation of the aligned estimates.
    pub std: f64,
    pub samples: usize,
    pub mean_true_rate: f64,
    /// Per-sample errors split by the true rate's category.
    pub categories: [ErrorSum; 3],
}

fn population_std(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt()
}

/// Scores one subject's estimate stream against its ground truth.
pub fn evaluate(subject: &str, estimates: &[EstimateRecord], truth: &GroundTruthSeries) -> Result<SubjectReport> {
    let pairs: Vec<(f64, f64)> = estimates
        .iter()
        .filter_map(|r| Some((r.bpm?, truth.at(r.t)?)))
        .filter(|(e, _)| e.is_finite())
        .collect();
    if pairs.is_empty() {
        let span = |t: &[f64]| match (t.first(), t.last()) {
            (Some(a), Some(b)) => format!("[{a}, {b}] s"),
            _ => "empty".to_string(),
        };
        let est_times: Vec<f64> = estimates.iter().map(|r| r.t).collect();
        return Err(Error::Evaluation(format!(
            "{subject}: no time overlap between estimates {} and truth {}",
            span(&est_times),
            span(&truth.times_s)
        )));
    }
    let mut categories = [ErrorSum::default(); 3];
    let mut abs_sum = 0.0;
    for &(e, t) in &pairs {
        let err = (e - t).abs();
        abs_sum += err;
        if let Some(c) = RateCategory::of(t) {
            categories[c.index()].abs_error_sum += err;
            categories[c.index()].samples += 1;
        }
    }
    let n = pairs.len();
    let est: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    Ok(SubjectReport {
        subject: subject.to_owned(),
        mae: abs_sum / n as f64,
        std: population_std(&est),
        samples: n,
        mean_true_rate: pairs.iter().map(|p| p.1).sum::<f64>() / n as f64,
        categories,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub bin_low: f64,
    pub bin_high: f64,
    pub count: usize,
}

/// Fixed-width histogram starting at zero; empty input gives no bins.
pub fn histogram(values: &[f64], width: f64) -> Vec<HistogramBin> {
    let Some(max) = values.iter().copied().filter(|v| v.is_finite()).reduce(f64::max) else {
        return Vec::new();
    };
    let bins = ((max / width).floor() as usize + 1).max(1);
    let mut counts = vec![0usize; bins];
    for v in values.iter().filter(|v| v.is_finite()) {
        counts[((v.max(0.0) / width).floor() as usize).min(bins - 1)] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| HistogramBin {
            bin_low: i as f64 * width,
            bin_high: (i + 1) as f64 * width,
            count,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CategoryError {
    pub category: RateCategory,
    pub mae: Option<f64>,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub subjects: Vec<SubjectReport>,
    pub categories: Vec<CategoryError>,
    /// Mean absolute error pooled over every aligned sample.
    pub ensemble_mae: Option<f64>,
    pub mae_histogram: Vec<HistogramBin>,
    pub std_histogram: Vec<HistogramBin>,
}

impl EvaluationReport {
    pub fn from_subjects(subjects: Vec<SubjectReport>) -> Self {
        let mut sums = [ErrorSum::default(); 3];
        for s in &subjects {
            for (acc, c) in sums.iter_mut().zip(&s.categories) {
                acc.add(c);
            }
        }
        let total: usize = subjects.iter().map(|s| s.samples).sum();
        let weighted: f64 = subjects.iter().map(|s| s.mae * s.samples as f64).sum();
        let maes: Vec<f64> = subjects.iter().map(|s| s.mae).collect();
        let stds: Vec<f64> = subjects.iter().map(|s| s.std).collect();
        Self {
            categories: RateCategory::ALL
                .into_iter()
                .zip(sums)
                .map(|(category, s)| CategoryError {
                    category,
                    mae: s.mae(),
                    samples: s.samples,
                })
                .collect(),
            ensemble_mae: (total > 0).then(|| weighted / total as f64),
            mae_histogram: histogram(&maes, HIST_BIN_BPM),
            std_histogram: histogram(&stds, HIST_BIN_BPM),
            subjects,
        }
    }

    pub fn category(&self, c: RateCategory) -> Option<&CategoryError> {
        self.categories.iter().find(|e| e.category == c)
    }
}
