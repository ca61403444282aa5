//! Pseudo-spectral simulation and verification toolkit for the two-dimensional
//! Patlak-Keller-Segel system coupled to incompressible Navier-Stokes flow.

// `!(x > 0.0)` is used on purpose so NaN is rejected too; quadrature tables keep their published digits
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod error;
pub mod spectral;

pub use error::{Error, Result};
pub mod elliptic;
pub mod quadrature;
pub mod state;
pub mod evolve;
pub mod functionals;
pub mod mild;
pub mod inequalities;
pub mod app;
