// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dsp;
pub mod error;
pub mod harness;
pub mod num;
pub mod spectral;
pub mod synthesis;
pub mod tracking;

pub use error::{Error, Result};
pub use num::Real;

pub type Frame32 = synthesis::Frame<f32>;
pub type Frame64 = synthesis::Frame<f64>;
pub type FrameSequence32 = synthesis::FrameSequence<f32>;
pub type FrameSequence64 = synthesis::FrameSequence<f64>;
pub type PhaseSignal32 = dsp::PhaseSignal<f32>;
pub type PhaseSignal64 = dsp::PhaseSignal<f64>;
pub type BreathSpectrum32 = spectral::BreathSpectrum<f32>;
pub type BreathSpectrum64 = spectral::BreathSpectrum<f64>;
pub type PeakSet32 = spectral::PeakSet<f32>;
pub type PeakSet64 = spectral::PeakSet<f64>;
pub type RegressorModel32 = spectral::RegressorModel<f32>;
pub type RegressorModel64 = spectral::RegressorModel<f64>;
pub type TrackState32 = tracking::TrackState<f32>;
pub type TrackState64 = tracking::TrackState<f64>;
pub type Pipeline32 = harness::Pipeline<f32>;
pub type Pipeline64 = harness::Pipeline<f64>;
