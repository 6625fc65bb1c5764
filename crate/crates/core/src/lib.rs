//! Numerical laboratory for mean curvature flow of convex radial graphs over
//! the round sphere.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arrival;
pub mod diagnostics;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod interp;
pub mod linear;
pub mod spectral;
pub mod stats;

pub use error::{Error, Result};
