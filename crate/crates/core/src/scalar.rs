//! Scalar abstraction shared by every numerical routine in the crate.
//!
//! All algorithms are written against [`Real`], which is implemented for
//! `f32` and `f64`. Complex quantities are `num_complex::Complex<T>`.

use std::fmt::{Debug, Display, LowerExp};

use nalgebra::{DMatrix, DVector, RealField};
use num_complex::Complex;
use num_traits::{FromPrimitive, ToPrimitive};

/// Dense complex matrix over the real scalar `T`.
pub type CMatrix<T> = DMatrix<Complex<T>>;
/// Dense complex column vector over the real scalar `T`.
pub type CVector<T> = DVector<Complex<T>>;

/// Floating-point real scalar: `f32` or `f64`.
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + Display + LowerExp + Debug + Send + Sync + 'static
{
    /// Machine epsilon of the type.
    const EPSILON: Self;

    /// Lossy conversion from an `f64` literal.
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 literal representable")
    }

    fn nan() -> Self {
        Self::lit(f64::NAN)
    }

    fn infinity() -> Self {
        Self::lit(f64::INFINITY)
    }

    fn as_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    /// Rescales an absolute tolerance written for `f64` to this precision.
    ///
    /// Identity for `f64`; for `f32` the tolerance grows with the epsilon
    /// ratio but is capped at `1e-3`.
    fn tolerance(x: f64) -> Self {
        let ratio = Self::EPSILON.as_f64() / f64::EPSILON;
        if ratio <= 1.0 {
            Self::lit(x)
        } else {
            Self::lit((x * ratio).min(1e-3))
        }
    }
}

impl Real for f64 {
    const EPSILON: Self = f64::EPSILON;
}

impl Real for f32 {
    const EPSILON: Self = f32::EPSILON;
}

/// Real number as a complex value.
#[inline]
pub fn re<T: Real>(x: T) -> Complex<T> {
    Complex::new(x, T::zero())
}

/// The imaginary unit.
#[inline]
pub fn imag_unit<T: Real>() -> Complex<T> {
    Complex::new(T::zero(), T::one())
}

/// Numerical tolerances used across the crate.
///
/// `structure` guards exact-structure checks (Hermiticity, skewness,
/// unitarity), `singular` is the relative threshold below which a block is
/// treated as singular, and `circle` decides whether a Floquet multiplier
/// lies on the unit circle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances<T> {
    pub structure: T,
    pub singular: T,
    pub circle: T,
}

impl<T: Real> Default for Tolerances<T> {
    fn default() -> Self {
        Self {
            structure: T::tolerance(1e-12),
            singular: T::tolerance(1e-10),
            circle: T::tolerance(1e-8),
        }
    }
}

impl<T: Real> Tolerances<T> {
    pub fn with_circle(mut self, circle: T) -> Self {
        self.circle = circle;
        self
    }

    /// Rejects non-positive or non-finite tolerances.
    pub fn is_valid(&self) -> bool {
        [self.structure, self.singular, self.circle]
            .iter()
            .all(|t| t.is_finite() && *t > T::zero())
    }
}
