//! Filesystem side of the gait corruption toolkit: PNG sequence trees,
//! manifests, mask packs, embedding files, reports and the `gaitcorrupt` CLI.
//! The numeric work lives in [`gaitcorrupt_core`].

pub mod cli;
pub mod config;
pub mod dataset_io;
pub mod embeddings;
pub mod error;
pub mod maskpack;
pub mod pipeline;
pub mod protocol_files;
pub mod report;
pub mod synth;

pub use error::{IoError, Result};
pub use gaitcorrupt_core as core;
