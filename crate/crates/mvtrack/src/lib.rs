//! File formats, configuration and the `mvtrack` command line on top of
//! `mvtrack-core`.

pub mod cli;
pub mod config;
pub mod dataset;
pub mod embedding;
pub mod error;
pub mod mot;
pub mod report;
pub mod selfcheck;

pub use error::{Error, Result};
