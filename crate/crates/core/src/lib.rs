// `!(x > 0.0)` style checks deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod analysis;
pub mod dsl;
pub mod epoching;
pub mod error;
pub mod exec;
pub mod fileio;
pub mod filters;
pub mod graph;
pub mod ml;
pub mod net;
pub mod nodes;
pub mod registry;
pub mod select;
pub mod synth;
pub mod types;

pub use error::{Error, Result};
