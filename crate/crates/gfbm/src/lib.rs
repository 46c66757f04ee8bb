// Negated comparisons like `!(x > 0.0)` are used deliberately: they
// reject NaN along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod grid;
pub mod io;
pub mod kernelcov;
pub mod lamperti;
pub mod lilharness;
mod linalg;
pub mod params;
pub mod pathsim;
pub mod quad;
pub mod rkhs;
pub mod stats;

pub use error::{GfbmError, Result};
pub use grid::TimeGrid;
pub use params::GfbmParams;
