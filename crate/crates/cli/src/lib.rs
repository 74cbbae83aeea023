//! Command-line front end: TOML run configs with unit-suffixed values,
//! flag overrides, and dispatch to the `epgrav` studies.

pub mod commands;
pub mod config;
pub mod error;
pub mod units;
