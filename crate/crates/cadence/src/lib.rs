//! Service, practice stream and command line over `cadence-core`.

pub mod api;
pub mod cli;
pub mod config;
pub mod service;
pub mod stream;
pub mod workflow;
