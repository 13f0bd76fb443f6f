//! Pipeline from time-series tables to correlation matrices, orbit
//! distances, group Fréchet means and difference matrices.

pub mod app;
pub mod error;
pub mod manifest;
pub mod matrix_io;
pub mod pipeline;
pub mod table;

pub use error::{PipelineError, Result};
