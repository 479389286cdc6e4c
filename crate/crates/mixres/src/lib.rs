//! Image IO, the JPEG bridge, training, evaluation and the command line
//! front end for the mixed-resolution compression pipeline.

pub mod cli;
pub mod codec;
pub mod config;
pub mod error;
pub mod evaluator;
pub mod imaging;
pub mod trainer;

pub use error::{Error, Result};
