//! Library side of the `bevkit` command-line harness: configuration
//! parsing, the end-to-end pipeline, kernel benchmarks, and the command
//! implementations the binary dispatches to.

pub mod bench;
pub mod commands;
pub mod config;
pub mod manifest;
pub mod pipeline;
