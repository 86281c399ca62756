//! Synthesis and verification of isothermic surfaces with one family of
//! planar curvature lines, built from Jacobi theta functions.

pub mod error;
pub mod numerics;
pub mod theta;
pub mod quat;
pub mod elliptic;
pub mod curvefamily;
pub mod reparam;
pub mod frame;
pub mod surface;
pub mod spherical;

pub use error::{Error, Result};
