//! File formats, configuration and experiment orchestration behind the
//! `ambilink` command.

pub mod commands;
pub mod config;
pub mod experiment;
pub mod store;
