//! Configuration parsing, trace files and text exports.

pub mod config;
pub mod export;
pub mod trace_file;

pub use config::{parse_config, parse_phase, RunConfig};
pub use trace_file::{
    read_trace, write_trace, DataLayout, DriveMetadata, FreqUnit, TraceFile, TraceFormat,
};
