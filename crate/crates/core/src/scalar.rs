//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Real field the estimator, simulator and diagnostics are generic over.
///
/// Implemented for `f32` and `f64`. Tolerances in the crate are expressed in
/// `f64` and converted with [`Scalar::lit`], so single precision runs the same
/// code paths with correspondingly looser residuals.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Machine epsilon as `f64`, used to scale solver tolerances.
    const EPSILON_F64: f64;

    /// Converts an `f64` literal; saturates instead of failing.
    #[inline]
    fn lit(x: f64) -> Self {
        match Self::from_f64(x) {
            Some(v) if v.is_finite() || !x.is_finite() => v,
            _ if x > 0.0 => Self::max_value(),
            _ => Self::min_value(),
        }
    }

    /// Lossy conversion for reporting.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).unwrap_or_else(Self::max_value)
    }
}

impl Scalar for f32 {
    const EPSILON_F64: f64 = f32::EPSILON as f64;
}

impl Scalar for f64 {
    const EPSILON_F64: f64 = f64::EPSILON;
}
