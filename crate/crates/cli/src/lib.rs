//! Experiment runner for the `nhlab` simulations.
//!
//! [`config`] parses and validates the TOML experiment file, [`sweep`] and
//! [`commands`] produce CSV/JSON outputs, and [`checks`] holds the property
//! suite behind `nhlab verify`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checks;
pub mod commands;
pub mod config;
pub mod report;
pub mod sweep;
