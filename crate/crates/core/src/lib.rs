//! Numerical laboratory for a two-dimensional magnetoelastic body: an elastic
//! displacement `u` with Dirichlet walls coupled to a diffusing scalar
//! magnetic perturbation `h` with insulating (Neumann) walls.

// `!(x > 0.0)` guards are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod energy;
pub mod error;
pub mod experiment;
pub mod field;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod model;
pub mod ops;
pub mod periodic;
pub mod stepper;

pub use error::{Error, Result};
pub use field::{ScalarBc, ScalarField, VectorBc, VectorField2};
pub use grid::Grid2D;
