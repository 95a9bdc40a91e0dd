//! Numerical laboratory for free-boundary minimal graphs, their stability,
//! and conformal descent to metrics with minimal boundary.

// Negated comparisons are how NaN gets rejected, and stencil loops read
// better with explicit indices.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::too_many_arguments)]

pub mod conformal;
pub mod error;
pub mod experiments;
pub mod field;
pub mod hypersurface;
pub mod linalg;
pub mod metric;
pub mod par;
pub mod scenarios;
pub mod solver;
pub mod stability;

pub use error::{Error, Result};
