//! Scalar abstraction for the model code.
//!
//! Everything numeric (encoder, retriever, reader, metrics) is generic over
//! [`Scalar`] so the same code runs at f32 or f64. Artifacts on disk are
//! always stored as f64.

use std::fmt::{Debug, Display};

use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive, NumAssign};

/// Floating-point scalar usable by the model code: f32 or f64.
pub trait Scalar:
    Float + FromPrimitive + NumAssign + ScalarOperand + LinalgScalar + Debug + Display + Send + Sync + 'static
{
    fn cast(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("finite f64 converts to scalar")
    }

    fn as_f64(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).expect("scalar converts to f64")
    }

    fn cast_usize(v: usize) -> Self {
        <Self as FromPrimitive>::from_usize(v).expect("usize converts to scalar")
    }
}

impl<T> Scalar for T where
    T: Float
        + FromPrimitive
        + NumAssign
        + ScalarOperand
        + LinalgScalar
        + Debug
        + Display
        + Send
        + Sync
        + 'static
{
}
