//! Command-line front end: layered configuration, run orchestration, and
//! artifact output with a hashed provenance manifest.

pub mod config;
pub mod output;
pub mod run;
pub mod verify;
