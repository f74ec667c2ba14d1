pub mod cli;
pub mod data;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod growth;
pub mod learners;
pub mod neighbors;
pub mod pipeline;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
