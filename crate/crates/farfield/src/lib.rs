//! File formats, configuration, caching and stage orchestration around
//! [`farfield_core`].

pub mod binfmt;
pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod pipeline;
pub mod rttm;
pub mod score;
pub mod sim;
pub mod store;
pub mod wav;

pub use config::PipelineConfig;
pub use error::{Error, Result};
pub use farfield_core as core;
pub use manifest::Manifest;
pub use pipeline::Pipeline;
