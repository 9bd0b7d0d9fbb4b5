//! Scalar abstraction for the numeric core.
//!
//! Embedding tables, score functions, gradients, and the evaluator network
//! are generic over [`Scalar`] so the same code runs in `f32` or `f64`.
//! Randomness is always drawn in `f64` and narrowed, so both instantiations
//! consume identical RNG streams.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, NumAssignOps};

/// Floating-point scalar: `f32` or `f64`.
pub trait Scalar:
    Float + NumAssignOps + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Round an `f64` to the nearest representable value.
    fn of(v: f64) -> Self;

    /// Widen to `f64`.
    fn widen(self) -> f64;
}

impl Scalar for f32 {
    #[inline]
    fn of(v: f64) -> Self {
        v as f32
    }

    #[inline]
    fn widen(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    #[inline]
    fn of(v: f64) -> Self {
        v
    }

    #[inline]
    fn widen(self) -> f64 {
        self
    }
}
