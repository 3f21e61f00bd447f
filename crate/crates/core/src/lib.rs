//! Numerical tools for the viscous Gauss–Codazzi system on metrics of
//! catenoid and helicoid type.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod diagnostics;
pub mod error;
pub mod immersion;
pub mod invariant_region;
pub mod metric_lab;
pub mod solver;
pub mod state_space;

pub use error::{Error, Result};
