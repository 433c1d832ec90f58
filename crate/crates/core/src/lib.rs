pub mod depositum;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod problems;
pub mod regularizers;
pub mod rng;
pub mod topology;

pub use error::{Error, Result};
