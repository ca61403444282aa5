//! Periodic grid, FFTs, spectral differentiation and Fourier multipliers.

mod field;
mod grid;
mod ops;

pub use field::{forward_pair, inverse_pair, ScalarField, SpectralField, VectorField};
pub use grid::Grid;
pub use ops::{curl, dealias, divergence, gradient, heat_semigroup, heat_semigroup_vector, laplacian, leray_project};

pub(crate) use field::check_time;
pub(crate) use ops::{leray_in_place, spectral_divergence, spectral_gradient};
