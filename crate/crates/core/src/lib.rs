//! Power-grid natural-hazard risk assessment: network model, hazard
//! sampling, fragility, loss and regional economic impact.

// `!(x >= 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod economics;
pub mod error;
pub mod fragility;
pub mod geojson;
pub mod geometry;
pub mod hazard;
pub mod loss;
pub mod network;
pub mod pipeline;
pub mod util;

pub use error::{Error, Result};
