//! Experiment runner around `nonlocal-core`: plain-text configs, the
//! bundled experiment catalog, CSV/JSON artifact emission, and the CLI
//! pipelines (`simulate`, `verify-inequality`, `envelope`, `dispersal`,
//! `constants`, `catalog`).
//!
//! Identical config and seed produce byte-identical artifacts at any
//! thread count: worker results are collected by unit index before
//! anything is written.

pub mod catalog;
pub mod config;
pub mod field_io;
pub mod json;
pub mod runner;
pub mod series_io;

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "NONLOCAL_LAB_OUT";
