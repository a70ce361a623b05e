//! Synthetic FMCW recordings of a standing, breathing, swaying subject.

pub mod config;
pub mod frames;
pub mod rriq;
pub mod waveform;

pub use config::{BreathShape, RadarConfig, SubjectScenario, SwayComponent};
pub use frames::{synthesize_frames, Frame, FrameSequence, TruthRecord};
pub use rriq::{load_rriq, read_rriq, save_rriq, write_rriq};
pub use waveform::{breathing_waveform, sway_waveform, BreathModel, SwayModel};
