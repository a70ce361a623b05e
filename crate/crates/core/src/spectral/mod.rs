//! Breath spectrum, peaks, confidence metric and rate estimators.

pub mod estimators;
pub mod features;
pub mod peaks;
pub mod regressor;
pub mod spectrum;

pub use estimators::{
    classical_estimate, cm_weighted, power_peaks_weighted, power_weighted, power_weighted_over, PowerSpan,
    DEFAULT_AVERAGED_PEAKS,
};
pub use features::{feature_vector, FeatureVector, FEATURE_DIM};
pub use peaks::{confidence_metric, confidence_metric_at, find_peaks, find_peaks_with, Peak, PeakSet, CM_HALF_WINDOW};
pub use regressor::{
    load_rrnn, read_rrnn, regressor_forward, regressor_train, save_rrnn, write_rrnn, RegressorModel, TrainHyper,
    TrainReport, DEFAULT_LAYER_DIMS,
};
pub use spectrum::{breath_spectrum, BreathSpectrum, SpectrumAnalyzer};
