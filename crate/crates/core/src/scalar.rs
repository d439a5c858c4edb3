//! Scalar abstraction shared by every numerical module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real floating-point scalar the library is generic over (`f32` or `f64`).
///
/// `rustfft::FftNum` pulls in `num_traits::Signed`, whose `abs`/`signum`
/// collide with the `Float` methods of the same name; call them as
/// `Float::abs(x)` inside generic code.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + rustfft::FftNum
    + Default
    + Debug
    + Display
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 literal representable")
    }

    /// Converts a count or index.
    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn from_i64_lossy(n: i64) -> Self {
        <Self as FromPrimitive>::from_i64(n).expect("i64 representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    /// Machine epsilon as a plain value.
    #[inline]
    fn eps() -> Self {
        <Self as Float>::epsilon()
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Complex scalar over a [`Real`].
pub type Cplx<T> = Complex<T>;

#[inline]
pub(crate) fn abs<T: Real>(x: T) -> T {
    Float::abs(x)
}

#[inline]
pub(crate) fn cis<T: Real>(theta: T) -> Cplx<T> {
    Complex::new(theta.cos(), theta.sin())
}

#[inline]
pub(crate) fn czero<T: Real>() -> Cplx<T> {
    Complex::new(T::zero(), T::zero())
}
