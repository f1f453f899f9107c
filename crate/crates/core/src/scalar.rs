//! Scalar abstraction shared by the tensor, fiber and field layers.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real scalar type the geometry is generic over (`f32` or `f64`).
///
/// The associated constants are the default numerical tolerances for the
/// precision; all of them can be overridden where an operation takes an
/// explicit tolerance.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Smallest admissible ratio `min eigenvalue / max eigenvalue` for a
    /// tensor to count as positive definite.
    const POSITIVITY_TOL: Self;
    /// Width of the band just below the `(4π)²/n` threshold (see
    /// [`crate::fiber::classify`]).
    const CLASSIFICATION_TOL: Self;
    /// Jacobi stopping criterion, relative to the initial Frobenius norm.
    const JACOBI_TOL: Self;
    /// Allowed deviation of the quadrature weights from total mass one.
    const WEIGHT_SUM_TOL: Self;

    /// Converts an `f64` literal. Panics only for values unrepresentable in `Self`,
    /// which cannot happen for finite literals.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("dimension fits in scalar")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {
    const POSITIVITY_TOL: Self = 1e-6;
    const CLASSIFICATION_TOL: Self = 1e-4;
    const JACOBI_TOL: Self = 1e-7;
    const WEIGHT_SUM_TOL: Self = 1e-5;
}

impl Scalar for f64 {
    const POSITIVITY_TOL: Self = 1e-12;
    const CLASSIFICATION_TOL: Self = 1e-9;
    const JACOBI_TOL: Self = 1e-14;
    const WEIGHT_SUM_TOL: Self = 1e-12;
}
