//! Heat content of bounded sets under radial heat kernels.
// Coefficient tables keep full published digits; `!(x > 0.0)` style guards also reject NaN.
#![allow(clippy::excessive_precision, clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod geometry;
pub mod heat_content;
pub mod kernel;
pub mod numerics;
pub mod oracle;
pub mod quadrature;
pub mod report;
pub mod sampling;
pub mod special;
pub mod verify;

pub use error::{Error, Result};
