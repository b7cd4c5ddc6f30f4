//! Experiment configuration, orchestration and file output behind the CLI.

pub mod cli;
pub mod commands;
pub mod config;
pub mod experiments;
pub mod output;
pub mod selftest;
