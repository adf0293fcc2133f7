//! File formats, configuration, evaluation and benchmarks around
//! [`wallmap_core`], plus the `wallmap` command-line tool.

pub mod bench;
pub mod config;
pub mod eval;
pub mod export;
pub mod replay;
pub mod stats;

pub use wallmap_core as core;
