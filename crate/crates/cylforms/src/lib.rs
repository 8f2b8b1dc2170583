//! Harmonic differential forms on two-dimensional Riemannian cylinders.
//!
//! The crate computes Hodge Laplacians, Dirichlet-to-Neumann maps and Green's
//! forms for 0-, 1- and 2-forms on `S¹ × [0, Z]` with metrics
//! `g11(x1, x2) dx1² + g22(x2) dx2²`, runs the factorization symbol calculus
//! of the 1-form Laplacian at the boundary, and recovers boundary jets of the
//! metric from those symbols.

pub mod banded;
pub mod dtn;
pub mod error;
pub mod expr;
pub mod fd;
pub mod forms;
pub mod geometry;
pub mod greens;
pub mod hodge_ops;
pub mod jet;
pub mod modes;
pub mod par;
pub mod quad;
pub mod symbols;

pub use error::{Error, Result};
pub use geometry::{ConformalFactor, MetricField2D};
