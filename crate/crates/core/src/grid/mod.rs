//! Discrete calculus on rectangular lattices.

mod domain;
mod field;
pub mod io;
mod ops;

pub use domain::{Boundary, GridDomain};
pub use field::{Field, FluxField, VectorField};
pub use ops::{divergence, gradient, regularized_flux, sup_v, tv_energy};
pub(crate) use ops::{divergence_into, flux_in_place, gradient_into};
