use std::fmt::{Debug, Display};
use std::ops::{Add, Mul, Neg, Sub};

use num_traits::{Float, FromPrimitive};

/// Floating point types the numeric layers are generic over.
pub trait Real: Float + FromPrimitive + Debug + Display + Default + Send + Sync + 'static {
    fn lit(v: f64) -> Self {
        Self::from_f64(v).unwrap()
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Ring values a numeric polynomial can be evaluated at: plain reals or jets.
pub trait Ring<T: Real>:
    Clone + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self>
{
    fn cst(v: T) -> Self;
}

impl<T: Real> Ring<T> for T {
    fn cst(v: T) -> Self {
        v
    }
}
