//! Scalar abstraction: all numeric kernels are generic over a floating-point
//! type implementing [`Scalar`]. `f64` is the default used by the drivers and
//! the CLI; `f32` works for the linear-algebra and model layers.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive};

/// Floating-point scalar usable by every kernel in this crate.
pub trait Scalar:
    Float + FromPrimitive + Sum + Display + Debug + Default + Send + Sync + 'static
{
    /// Shorthand conversion from an `f64` literal (tolerances, constants).
    fn of(value: f64) -> Self {
        Self::from_f64(value).expect("scalar conversion from f64")
    }

    /// Lossy view as `f64`, used when recording run histories.
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar conversion to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
