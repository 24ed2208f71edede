//! Scalar abstraction for the link-budget and energy arithmetic.
//!
//! Everything that works in dB, watts or joules is generic over [`Scalar`],
//! so the same code runs in `f32` for quick estimates and `f64` inside the
//! engine. Virtual time is never a scalar: it is integer nanoseconds.

use std::fmt::{Debug, Display};
use std::time::Duration;

use num_traits::{Float, FromPrimitive, ToPrimitive};

pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal. Panics only if the value is not
    /// representable, which cannot happen for finite constants in f32/f64.
    #[inline]
    fn lit(value: f64) -> Self {
        Self::from_f64(value).expect("literal representable in scalar type")
    }

    #[inline]
    fn seconds(d: Duration) -> Self {
        Self::lit(d.as_nanos() as f64) / Self::lit(1e9)
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Scalar for T where
    T: Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
}

/// Decibel ratio to linear power ratio.
#[inline]
pub fn db_to_linear<S: Scalar>(db: S) -> S {
    S::lit(10.0).powf(db / S::lit(10.0))
}
