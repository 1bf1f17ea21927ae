//! Boundary representations of free groups acting on regular trees.
//!
//! The crate models `F_k` on its Cayley tree and computes, exactly where the
//! tree allows it, the Patterson-Sullivan density, the Knapp-Stein family and
//! the logarithmic kernel on cylinder functions, the special-representation
//! cocycle with its quadratic form, and the equidistribution averages that
//! feed the irreducibility criterion.

pub mod boundary_ops;
pub mod conformal;
pub mod equidist;
pub mod error;
pub mod hypspace;
pub mod scalar;
pub mod special_rep;

pub use boundary_ops::{CylinderFunction, GalerkinForm, Kernel};
pub use conformal::{critical_exponent, ConformalDensity, TruncatedOrbitMeasure};
pub use error::{Error, Result};
pub use hypspace::{
    BoundaryPoint, Cylinder, FreeGroup, GromovProduct, GroupWord, HalfInt, Letter, Limits,
    ModelParams, ModelSpace, Point,
};
pub use scalar::{Numeric, Rational, Scalar};
