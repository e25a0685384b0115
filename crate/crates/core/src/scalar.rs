use ndarray::NdFloat;
use num_traits::{FromPrimitive, ToPrimitive};
use std::iter::Sum;

/// Floating-point scalar the SPD machinery is generic over.
///
/// Everything in this crate is written against `Real`; `f64` is the
/// reference precision and the one the tolerances of the test-suite are
/// calibrated for. `f32` works but is only expected to agree to single
/// precision.
pub trait Real: NdFloat + FromPrimitive + ToPrimitive + Default + Sum {
    /// Relative asymmetry accepted when a matrix is declared symmetric.
    fn symmetry_tolerance() -> Self;

    /// Lossless-enough conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f64 {
    fn symmetry_tolerance() -> Self {
        1e-10
    }
}

impl Real for f32 {
    fn symmetry_tolerance() -> Self {
        100.0 * f32::EPSILON
    }
}
