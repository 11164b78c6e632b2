use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, NumAssign};

/// Floating point scalar the numeric pipeline is generic over.
///
/// Implemented for `f32` and `f64`. The bounds are what the samplers and the
/// SVD need: float arithmetic, assignment operators, summation, conversions
/// through `f64` for I/O, and thread safety for the parallel passes.
pub trait Scalar: Float + NumAssign + Sum + Debug + Display + Send + Sync + 'static {
    /// Conversion from `f64`, rounding to the nearest representable value.
    fn from_f64(x: f64) -> Self;

    /// Conversion to `f64` for serialization and reporting.
    fn to_f64_lossy(self) -> f64;
}

impl Scalar for f32 {
    fn from_f64(x: f64) -> Self {
        x as f32
    }

    fn to_f64_lossy(self) -> f64 {
        f64::from(self)
    }
}

impl Scalar for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }

    fn to_f64_lossy(self) -> f64 {
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn roundtrip<S: Scalar>(x: f64) -> f64 {
        S::from_f64(x).to_f64_lossy()
    }

    #[test]
    fn f64_roundtrip_is_exact() {
        for &x in &[0.0, 1.0, -2.5, 1e-9, 12345.678] {
            assert_eq!(roundtrip::<f64>(x), x);
        }
    }

    #[test]
    fn f32_roundtrip_of_small_integers_is_exact() {
        for &x in &[0.0, 1.0, -2.0, 1024.0] {
            assert_eq!(roundtrip::<f32>(x), x);
        }
    }
}
