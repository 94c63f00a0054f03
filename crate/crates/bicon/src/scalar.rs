//! Scalar abstraction for the numeric core.
//!
//! Everything in this crate that does arithmetic is generic over [`Real`],
//! so the same code runs in `f32` (pipeline files store 32-bit floats) and
//! in `f64` (training and all gradient verification).

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, NumAssign};

/// Floating-point scalar: `f32` or `f64`.
pub trait Real:
    Float + FromPrimitive + NumAssign + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossless conversion from `f64` literals used for constants
    /// (clamp epsilon, loss weights, learning rates).
    fn from_f64_c(v: f64) -> Self {
        Self::from_f64(v).expect("constant representable in every Real type")
    }

    /// Cast a count to the scalar type, for mean reductions.
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable")
    }
}

impl Real for f32 {}
impl Real for f64 {}
