//! Floating-point abstraction shared by the fusion, optimizer and topic-vector math.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar used for feature scores, weights and objective values.
///
/// Implemented for `f32` and `f64`. The tolerance used for the sum-to-one
/// weight check widens with the type's precision.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Allowed deviation of a weight vector sum from one.
    fn simplex_tolerance() -> Self;

    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 converts to any float")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    fn simplex_tolerance() -> Self {
        1e-9
    }
}

impl Scalar for f32 {
    fn simplex_tolerance() -> Self {
        // 11 additions of values in [0, 1] accumulate a few ulps.
        2e-6
    }
}
