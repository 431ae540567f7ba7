//! Scalar abstraction shared by the potential, the dynamics and the integrator.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point scalar used throughout the model kernels: `f32` or `f64`.
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
    /// Converts an `f64` literal. Every literal used by the kernels is representable.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_angle<S: Real>(theta: S) -> S {
    let two_pi = S::TAU();
    let w = theta % two_pi;
    if w < S::zero() {
        w + two_pi
    } else {
        w
    }
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_signed<S: Real>(theta: S) -> S {
    let w = wrap_angle(theta);
    if w > S::PI() {
        w - S::TAU()
    } else {
        w
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wraps() {
        assert!((wrap_angle(-0.5f64) - (std::f64::consts::TAU - 0.5)).abs() < 1e-15);
        assert!((wrap_signed(3.5f64) - (3.5 - std::f64::consts::TAU)).abs() < 1e-15);
        assert_eq!(wrap_angle(0.0f32), 0.0);
    }
}
