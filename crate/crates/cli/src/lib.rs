//! Config loading and stage orchestration behind the `actorcause` binary.

pub mod config;
pub mod pipeline;

pub use config::{load, LoadedConfig, PipelineConfig};
pub use pipeline::{exit_code, Manifest, Pipeline, Stage, StageError};
