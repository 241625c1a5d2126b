//! Library surface of the `edl` experiment runner. The binary in
//! `main.rs` is a thin argument-parsing shell over these modules; tests
//! reuse the config, logging, and summary logic directly.

pub mod commands;
pub mod config;
pub mod logging;
pub mod summary;
