//! Scalar abstraction shared by every numerical module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Real floating-point scalar: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Largest argument accepted by `sinh`/`cosh` before the result is
    /// considered an overflow.
    fn hyperbolic_limit() -> Self;
}

impl Real for f32 {
    fn hyperbolic_limit() -> Self {
        88.0
    }
}

impl Real for f64 {
    fn hyperbolic_limit() -> Self {
        700.0
    }
}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(v: f64) -> T {
    T::from_f64(v).expect("f64 literal representable in scalar type")
}

/// Converts a count into `T`.
#[inline]
pub fn count<T: Real>(n: usize) -> T {
    T::from_usize(n).expect("count representable in scalar type")
}

/// Lossy conversion to `f64`.
#[inline]
pub fn to_f64<T: Real>(v: T) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

/// Absolute tolerance for "sums to one" checks, scaled to the precision of `T`.
pub fn unit_sum_tolerance<T: Real>() -> T {
    (T::epsilon() * lit(4096.0)).max(lit(1e-12))
}

/// Reduces an angle into `[0, 2π)`.
pub fn wrap_two_pi<T: Real>(angle: T) -> T {
    let tau = T::TAU();
    let r = angle % tau;
    let r = if r < T::zero() { r + tau } else { r };
    if r >= tau {
        T::zero()
    } else {
        r
    }
}

/// Reduces an angle difference into `(-π, π]`.
pub fn wrap_pi<T: Real>(angle: T) -> T {
    let r = wrap_two_pi(angle);
    if r > T::PI() {
        r - T::TAU()
    } else {
        r
    }
}
