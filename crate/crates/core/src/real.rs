//! Scalar abstraction for the numeric core.
//!
//! All matrix and regression kernels are generic over [`Real`], so the same
//! code runs at `f32` or `f64` precision. The data formats, the estimators
//! and the benchmark protocol are fixed at `f64`.

use num_traits::{FromPrimitive, ToPrimitive};

/// Floating-point scalar: `f32` or `f64`.
pub trait Real:
    nalgebra::RealField + FromPrimitive + ToPrimitive + Copy + Default + std::iter::Sum<Self>
{
    /// Converts an `f64` constant (tolerances, literals) into `Self`.
    fn of(value: f64) -> Self {
        Self::from_f64(value).expect("finite f64 constant")
    }

    /// Lossy conversion to `f64` for reporting and error messages.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}
