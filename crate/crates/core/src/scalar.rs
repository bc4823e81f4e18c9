//! Scalar abstraction over the floating-point type used by the numerics.

use num_traits::{Float, FromPrimitive, NumAssignOps, ToPrimitive};

/// Floating-point scalar for all model arithmetic (`f32` or `f64`).
pub trait Scalar:
    Float
    + NumAssignOps
    + FromPrimitive
    + ToPrimitive
    + std::iter::Sum
    + std::fmt::Debug
    + std::fmt::Display
    + Send
    + Sync
    + 'static
{
    fn from_real(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 not representable in scalar type")
    }

    fn from_count(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("usize not representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        <Self as ToPrimitive>::to_f64(&self).expect("scalar not representable as f64")
    }

    fn half() -> Self {
        Self::from_real(0.5)
    }

    fn two() -> Self {
        Self::from_real(2.0)
    }
}

impl<T> Scalar for T where
    T: Float
        + NumAssignOps
        + FromPrimitive
        + ToPrimitive
        + std::iter::Sum
        + std::fmt::Debug
        + std::fmt::Display
        + Send
        + Sync
        + 'static
{
}
