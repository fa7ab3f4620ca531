//! Floating-point scalar abstraction for the probability code.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive};

/// f32 or f64.
pub trait Scalar: Float + FromPrimitive + Debug + Display + Send + Sync + 'static {
    /// Allowed deviation of a probability vector's sum from one.
    fn normalization_tolerance() -> Self;
}

impl Scalar for f64 {
    fn normalization_tolerance() -> Self {
        1e-9
    }
}

impl Scalar for f32 {
    fn normalization_tolerance() -> Self {
        1e-5
    }
}
