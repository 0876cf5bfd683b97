//! Experiment runner around `cfoutage-core`: JSON configs, parallel drops,
//! CSV/JSON outputs.

pub use cfoutage_core as core;

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod pipeline;
