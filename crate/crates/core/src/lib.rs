//! Embedded-fracture poroelasticity on structured triangular grids with
//! nonlocal multicontinuum (NLMC) upscaling.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod coefficients;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod io;
pub mod nlmc;
pub mod solver;
pub mod sparse;

pub use error::{Error, Result};
