//! Value types carried by cylinder functions.
//!
//! Exact identities (cocycle relations, conformality) are checked with
//! [`Rational`]; spectral and kernel computations run in `f64` or
//! [`Complex64`].

use std::fmt::Debug;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use num_rational::Ratio;
use num_traits::{One, ToPrimitive, Zero};

/// Exact rational numbers used for masses and densities.
pub type Rational = Ratio<i128>;

pub trait Scalar:
    Clone
    + Debug
    + PartialEq
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + Send
    + Sync
{
    fn from_rational(r: &Rational) -> Self;
    fn conj(&self) -> Self;
}

/// Scalars that admit floating-point kernels.
pub trait Numeric: Scalar + Copy + Mul<f64, Output = Self> {
    fn norm_sqr(&self) -> f64;
    fn real(&self) -> f64;
    fn from_real(x: f64) -> Self;
}

impl Scalar for Rational {
    fn from_rational(r: &Rational) -> Self {
        *r
    }
    fn conj(&self) -> Self {
        *self
    }
}

impl Scalar for f64 {
    fn from_rational(r: &Rational) -> Self {
        rational_to_f64(r)
    }
    fn conj(&self) -> Self {
        *self
    }
}

impl Scalar for Complex64 {
    fn from_rational(r: &Rational) -> Self {
        Complex64::new(rational_to_f64(r), 0.0)
    }
    fn conj(&self) -> Self {
        Complex64::conj(self)
    }
}

impl Numeric for f64 {
    fn norm_sqr(&self) -> f64 {
        self * self
    }
    fn real(&self) -> f64 {
        *self
    }
    fn from_real(x: f64) -> Self {
        x
    }
}

impl Numeric for Complex64 {
    fn norm_sqr(&self) -> f64 {
        Complex64::norm_sqr(self)
    }
    fn real(&self) -> f64 {
        self.re
    }
    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
}

pub fn rational_to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        *r.numer() as f64 / *r.denom() as f64
    })
}

/// `base^exp` as an exact rational, for possibly negative exponents.
///
/// Panics when `|base|^|exp|` does not fit in `i128`.
pub fn rational_pow(base: i128, exp: i64) -> Rational {
    let magnitude = u32::try_from(exp.unsigned_abs())
        .ok()
        .and_then(|e| base.checked_pow(e))
        .unwrap_or_else(|| panic!("{base}^{exp} overflows i128"));
    if exp >= 0 {
        Rational::from_integer(magnitude)
    } else {
        Rational::new(1, magnitude)
    }
}
