//! gapkit: spectral-gap toolkit for Sturm-Liouville operators
//! -(p u')' + V u = lambda u on [0, pi] with separated boundary conditions.
//!
//! The crate computes the two lowest eigenvalues and the fundamental gap
//! Gamma = lambda2 - lambda1, characterizes gap-minimizing potentials within
//! single-well and convex classes, and resolves the large-height limit of
//! the minimal gap for the step family.

// negated comparisons are deliberate: `!(x > 0.0)` rejects NaN along with
// nonpositive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod cli;
pub mod error;
pub mod optimize;
pub mod potential;
pub mod roots;
pub mod solver;
pub mod step;
pub mod verify;

pub use error::{Error, Result};
