//! Scalar abstraction for path values and times.

use std::fmt::{Debug, Display};

/// Floating point type a path can be stored in: `f32` or `f64`.
///
/// Random variates are always drawn in `f64` and narrowed with [`Real::of`],
/// so an `f32` simulation consumes exactly the same stream as an `f64` one.
pub trait Real:
    num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + num_traits::FloatConst
    + core::ops::AddAssign
    + core::ops::SubAssign
    + core::ops::MulAssign
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    fn of(x: f64) -> Self;

    fn as_f64(self) -> f64;

    fn of_usize(n: usize) -> Self;
}

impl Real for f32 {
    #[inline]
    fn of(x: f64) -> Self {
        x as f32
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
    #[inline]
    fn of_usize(n: usize) -> Self {
        n as f32
    }
}

impl Real for f64 {
    #[inline]
    fn of(x: f64) -> Self {
        x
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
    #[inline]
    fn of_usize(n: usize) -> Self {
        n as f64
    }
}
