//! Command-line front end for the multirate stabilized SDE toolkit.
//!
//! A run is described by one versioned TOML file (sections of `key = value`
//! pairs) plus a handful of flag overrides, and emits CSV tables with
//! `key = value` metadata sidecars. All randomness flows from one explicit
//! seed; commands that draw noise refuse to run without one.

pub mod cli;
pub mod commands;
pub mod config;
pub mod csvio;
pub mod meta;

/// One failed in-run assertion. Commands collect these instead of aborting,
/// so a run always produces its artifacts together with the complete list of
/// checks it failed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Failure {
    pub check: String,
    pub detail: String,
}

impl Failure {
    pub fn new(check: impl Into<String>, detail: impl Into<String>) -> Self {
        Failure { check: check.into(), detail: detail.into() }
    }
}
