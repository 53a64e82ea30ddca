//! Simulation toolkit for microring photon-pair sources with point or
//! Mach-Zehnder couplers.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coincidence;
pub mod error;
pub mod matrix;
pub mod model;
pub mod pair;
pub mod presets;
pub mod spectrum;
pub mod transfer;
pub mod tuning;

pub use error::{Error, Result};
