//! Frame → range profile → slow-time phase → bandpassed breathing waveform.

pub mod filter;
pub mod phase;
pub mod range;

pub use filter::{bandpass, Bandpass, BandpassSpec, Biquad, FilterDesign};
pub use phase::{angle, extract_phase, unwrap_phase, PhaseSignal, PhaseUnwrapper, WrappedPhase};
pub use range::{range_fft, select_target_bin, RangeFft, RangeProfile, TargetBin, Window};
