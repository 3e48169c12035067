//! Higher-order (mean-variance-skewness-kurtosis) portfolio design under a
//! generalized hyperbolic skew-t return model.

// `!(x > 0.0)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::excessive_precision)]

pub mod data;
pub mod error;
pub mod experiments;
pub mod fit;
pub mod model;
pub mod nonparam;
pub mod par;
pub mod simplex;
pub mod solver;
pub mod special;
pub mod synthetic;
pub mod tilting;

pub use error::{HopError, Result};

/// Version tag embedded in every JSON document.
pub const SCHEMA: &str = "hop/v1";

#[cfg(test)]
pub(crate) mod testutil;
