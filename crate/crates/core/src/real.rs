//! Scalar abstraction for the analytic calculus.
//!
//! All probability/entropy/timing formulas are generic over [`Real`] so the
//! same code runs at `f32` or `f64`; the bit-level engine (bitstore,
//! extractor) is word-oriented and stays concrete. The exact-arithmetic side
//! of the LHV optimizer uses `num_rational::BigRational` instead.

use std::fmt;
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar: `f32` or `f64`.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Sum + fmt::Debug + fmt::Display + Send + Sync + 'static
{
    /// Lift an `f64` constant into the scalar type.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant representable in Real scalar")
    }

    /// Lift an unsigned integer (exact for f64 up to 2^53).
    fn of_u64(x: u64) -> Self {
        Self::from_u64(x).expect("u64 representable in Real scalar")
    }

    fn half() -> Self {
        Self::of(0.5)
    }

    fn two() -> Self {
        Self::of(2.0)
    }
}

impl Real for f32 {}
impl Real for f64 {}
