//! Online graph-filter learning over graphs that grow by one node per step.
// `!(x > 0.0)` is the idiom for rejecting NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attachment;
pub mod datagen;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod learners;
pub mod metrics;
pub mod rng;

pub use error::{Error, Result};
