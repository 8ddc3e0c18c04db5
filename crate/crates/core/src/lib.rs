//! Numerical tools for the homogeneous complex k-Hessian equation on exterior
//! and annular domains.

// `!(x > 0.0)` style guards are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod barriers;
pub mod error;
pub mod estimates;
pub mod export;
pub mod geometry;
pub mod linalg;
pub mod radial;
pub mod reinhardt;
pub mod symmfunc;

pub use error::{Error, Result};
