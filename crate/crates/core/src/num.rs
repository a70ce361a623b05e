//! Scalar abstraction shared by the signal chain.
//!
//! Everything downstream of the raw I/Q frames is generic over [`Real`], so
//! the same pipeline runs in `f32` (embedded-style budget) or `f64`
//! (reference accuracy).

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rustfft::FftNum;

/// Floating point scalar usable by every stage of the chain.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + FftNum + Default + Debug + Display + Sum + Send + Sync + 'static
{
    /// Lossy conversion from `f64`; used for literals and configuration values.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 is representable in every Real")
    }

    /// Widening conversion to `f64` for reporting and serialization.
    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn from_usize_lossy(v: usize) -> Self {
        Self::from_usize(v).unwrap_or_else(Self::nan)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Breaths per minute to hertz.
#[inline]
pub fn bpm_to_hz<T: Real>(bpm: T) -> T {
    bpm / T::lit(60.0)
}

/// Hertz to breaths per minute.
#[inline]
pub fn hz_to_bpm<T: Real>(hz: T) -> T {
    hz * T::lit(60.0)
}

/// Wrap an angle into `(-π, π]`.
#[inline]
pub fn wrap_angle<T: Real>(x: T) -> T {
    let two_pi = T::TAU();
    let mut y = x - two_pi * ((x + T::PI()) / two_pi).floor();
    // floor() maps the upper boundary to -π; fold it back.
    if y <= -T::PI() {
        y = y + two_pi;
    }
    y
}
