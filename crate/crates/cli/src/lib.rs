//! Configuration, orchestration and CSV output behind the `letf` binary.

pub mod commands;
pub mod config;
pub mod output;
