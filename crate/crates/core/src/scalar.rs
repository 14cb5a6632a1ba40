//! Floating-point abstraction shared by every numeric module.
//!
//! All the math in this crate is written against [`Scalar`], which is
//! implemented for `f32` and `f64`. The pipeline and the persisted file
//! formats use `f64`; `f32` is useful for memory-bound feature extraction.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// floating point: f32 or f64
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
    + FromStr
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` constant; never fails for finite inputs.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize fits in a float")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Parses a scalar from text, mapping failures to a readable message.
pub(crate) fn parse_scalar<T: Scalar>(s: &str) -> Result<T, String> {
    s.trim().parse::<T>().map_err(|_| format!("invalid number `{s}`"))
}
