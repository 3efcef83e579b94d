pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod model;
pub mod numeric;
pub mod pipeline;
pub mod scoring;
pub mod synth;
pub mod training;
pub mod wgat;
pub mod wlae;

pub use error::{Error, Result};
