// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod convexdom;
pub mod datum;
pub mod diagnostics;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod grid;
pub mod linalg;

pub use error::{Error, Result};
pub use geometry::{Manifold, ManifoldDescriptor, ManifoldPoint, TangentVector};
pub use grid::{Boundary, Field, FluxField, GridDomain, VectorField};
