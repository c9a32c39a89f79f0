//! Scalar abstraction for coordinates and distances.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point type usable for point coordinates.
///
/// Implemented for `f32` and `f64`. Random variates are always drawn as
/// `f64` and narrowed with [`Scalar::of`], so a given seed produces the same
/// point set (up to rounding) for both widths.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Tolerance used when checking unit-norm invariants.
    const NORM_TOL: Self;

    fn of(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("finite f64 is representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }
}

impl Scalar for f32 {
    const NORM_TOL: Self = 1e-5;
}

impl Scalar for f64 {
    const NORM_TOL: Self = 1e-12;
}
