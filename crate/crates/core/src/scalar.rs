//! Scalar abstractions.
//!
//! [`Real`] is what the solvers need. [`Field`] is the much lighter bound used by
//! the pure algebra (parameters and exponents), which lets exact rationals in.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::Neg;

use num_traits::{Float, FloatConst, FromPrimitive, Num, ToPrimitive};

/// Floating point type the simulation runs in.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Deepest dyadic level at which `k * 2^-level` is still exact for every
    /// index the solvers can produce.
    const MAX_DYADIC_LEVEL: u32;

    /// Converts an `f64` constant.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("constant representable in every Real")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f64 {
    const MAX_DYADIC_LEVEL: u32 = 52;
}

impl Real for f32 {
    const MAX_DYADIC_LEVEL: u32 = 23;
}

/// Ordered field: enough for the closed-form parameter algebra.
pub trait Field: Num + Copy + PartialOrd + Neg<Output = Self> + Debug {
    fn two() -> Self {
        Self::one() + Self::one()
    }
}

impl<T: Num + Copy + PartialOrd + Neg<Output = T> + Debug> Field for T {}

/// `2^-level` as a scalar.
#[inline]
pub(crate) fn pow2_neg<T: Real>(level: u32) -> T {
    T::lit((-(level as f64)).exp2())
}
