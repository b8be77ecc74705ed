use nalgebra::RealField;
use num_traits::{FromPrimitive, Num, NumAssign, ToPrimitive};

/// Scalar type for all floating-point math in the crate: `f32` or `f64`.
///
/// The bit-level Pauli/tableau algebra is exact and scalar-free; everything
/// that touches amplitudes, Bloch vectors or probabilities is generic over
/// this trait.
pub trait Real:
    RealField + Num + NumAssign + FromPrimitive + ToPrimitive + Copy + Default + std::iter::Sum
{
    /// Tolerance for purity / normalization checks.
    fn norm_tol() -> Self;

    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 -> scalar conversion")
    }

    fn to64(self) -> f64 {
        self.to_f64().expect("scalar -> f64 conversion")
    }

    fn half() -> Self {
        Self::of(0.5)
    }
}

impl Real for f32 {
    fn norm_tol() -> Self {
        1e-5
    }
}

impl Real for f64 {
    fn norm_tol() -> Self {
        1e-9
    }
}
