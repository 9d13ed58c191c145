//! File formats, run configuration, benchmarks and command implementations
//! around [`eswt_core`].

pub mod alloc_track;
pub mod bench;
pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod fsutil;
pub mod ppm;
pub mod report;

pub use error::{Error, Result};
