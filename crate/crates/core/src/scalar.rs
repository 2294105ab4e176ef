use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumCast};

/// Floating point scalar the models are evaluated in: `f32` or `f64`.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + NumCast + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn of(v: f64) -> Self {
        <Self as NumCast>::from(v).expect("f64 literal representable")
    }

    fn of_usize(n: usize) -> Self {
        <Self as NumCast>::from(n).expect("count representable")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
