//! File formats, configuration and the command pipeline around
//! `alignrec-core`.

pub mod binfmt;
pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod features;
pub mod graphcache;
pub mod interactions;
pub mod parallel;
pub mod report;
pub mod synthetic;

pub use config::RunConfig;
pub use error::{Error, Result};
