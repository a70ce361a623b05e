//! Run configuration: TOML file plus `RRMON_` environment overrides.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dsp::{BandpassSpec, Window};
use crate::error::{Error, Result};
use crate::synthesis::config::DISTANCE_RANGE_M;
use crate::synthesis::{RadarConfig, SubjectScenario};
use crate::tracking::TrackConfig;

/// Prefix of environment variables that override configuration keys.
/// Nested keys are joined with a double underscore, e.g.
/// `RRMON_TRACK__PROCESS_NOISE_Q=0.1`.
pub const ENV_PREFIX: &str = "RRMON_";

/// Shortest analysis window accepted, seconds.
pub const MIN_ANALYSIS_WINDOW_S: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Classical,
    CmWeighted,
    PowerWeighted,
    PowerPeaksWeighted,
    Regressor,
    #[default]
    AdaptiveKalman,
}

impl Estimator {
    pub const ALL: [Estimator; 6] = [
        Estimator::Classical,
        Estimator::CmWeighted,
        Estimator::PowerWeighted,
        Estimator::PowerPeaksWeighted,
        Estimator::Regressor,
        Estimator::AdaptiveKalman,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Estimator::Classical => "classical",
            Estimator::CmWeighted => "cm_weighted",
            Estimator::PowerWeighted => "power_weighted",
            Estimator::PowerPeaksWeighted => "power_peaks_weighted",
            Estimator::Regressor => "regressor",
            Estimator::AdaptiveKalman => "adaptive_kalman",
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Estimator::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown estimator '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputPaths {
    /// JSON-lines estimate stream.
    pub estimates: Option<PathBuf>,
    /// Directory for report and figure CSVs.
    pub report_dir: Option<PathBuf>,
    /// Per-step Kalman trace CSV.
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub radar: RadarConfig,
    pub scenarios: Vec<SubjectScenario>,
    pub analysis_window_s: f64,
    pub hop_frames: usize,
    pub estimator: Estimator,
    pub track: TrackConfig,
    pub bandpass: BandpassSpec,
    pub spectrum_fft_len: usize,
    /// Peaks extracted per window.
    pub peak_count: usize,
    pub range_window: Window,
    /// Distances searched for the subject's range bin, metres.
    pub search_range_m: (f64, f64),
    pub regressor_model: Option<PathBuf>,
    pub output: OutputPaths,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            radar: RadarConfig::default(),
            scenarios: Vec::new(),
            analysis_window_s: 30.0,
            hop_frames: 1,
            estimator: Estimator::default(),
            track: TrackConfig::default(),
            bandpass: BandpassSpec::default(),
            spectrum_fft_len: 1024,
            peak_count: 4,
            range_window: Window::Hann,
            search_range_m: DISTANCE_RANGE_M,
            regressor_model: None,
            output: OutputPaths::default(),
        }
    }
}

impl RunConfig {
    pub fn window_frames(&self) -> usize {
        (self.analysis_window_s * self.radar.frame_rate_hz).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_processing()?;
        if self.estimator == Estimator::Regressor && self.regressor_model.is_none() {
            return Err(Error::Config("estimator 'regressor' needs regressor_model".into()));
        }
        for s in &self.scenarios {
            s.validate(&self.radar).map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }

    /// Checks only the settings the streaming pipeline uses.
    pub fn validate_processing(&self) -> Result<()> {
        self.radar.validate().map_err(|e| Error::Config(e.to_string()))?;
        if !(self.analysis_window_s >= MIN_ANALYSIS_WINDOW_S && self.analysis_window_s.is_finite()) {
            return Err(Error::Config(format!(
                "analysis_window_s must be at least {MIN_ANALYSIS_WINDOW_S}, got {}",
                self.analysis_window_s
            )));
        }
        if self.hop_frames == 0 {
            return Err(Error::Config("hop_frames must be at least 1".into()));
        }
        if self.window_frames() > self.spectrum_fft_len {
            return Err(Error::Config(format!(
                "analysis window of {} frames exceeds spectrum_fft_len {}",
                self.window_frames(),
                self.spectrum_fft_len
            )));
        }
        if self.peak_count == 0 {
            return Err(Error::Config("peak_count must be at least 1".into()));
        }
        let (lo, hi) = self.search_range_m;
        if !(lo >= 0.0 && lo < hi && hi <= self.radar.max_range_m()) {
            return Err(Error::Config(format!(
                "search_range_m [{lo}, {hi}] invalid for this radar"
            )));
        }
        self.track.validate()?;
        self.bandpass
            .validate(self.radar.frame_rate_hz)
            .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        Self::from_toml_with_env(text, std::iter::empty())
    }

    /// Parses `text` after applying `RRMON_*` overrides from `env`.
    pub fn from_toml_with_env(text: &str, env: impl IntoIterator<Item = (String, String)>) -> Result<Self> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        apply_env_overrides(&mut table, env)?;
        let cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a TOML file (or the defaults when `path` is `None`) and applies
    /// the process environment.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let text = match path {
            Some(p) => {
                std::fs::read_to_string(p).map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?
            }
            None => String::new(),
        };
        Self::from_toml_with_env(&text, std::env::vars())
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

fn parse_env_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_owned()))
}

fn apply_env_overrides(table: &mut toml::Table, env: impl IntoIterator<Item = (String, String)>) -> Result<()> {
    let mut vars: Vec<(String, String)> = env.into_iter().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
    vars.sort();
    for (key, raw) in vars {
        let path: Vec<String> = key[ENV_PREFIX.len()..]
            .split("__")
            .map(|s| s.to_ascii_lowercase())
            .collect();
        if path.iter().any(|p| p.is_empty()) {
            return Err(Error::Config(format!("malformed override variable {key}")));
        }
        let (leaf, parents) = path.split_last().expect("non-empty path");
        let mut cur = &mut *table;
        for p in parents {
            let entry = cur
                .entry(p.clone())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            cur = entry
                .as_table_mut()
                .ok_or_else(|| Error::Config(format!("{key}: '{p}' is not a table")))?;
        }
        cur.insert(leaf.clone(), parse_env_value(&raw));
    }
    Ok(())
}
