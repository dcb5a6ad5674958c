//! Command-line companion to `fabcheck-core`: count-table IO, report
//! rendering, plot data and the `fabcheck` binary.

pub mod cli;
pub mod config;
pub mod plots;
pub mod report;
pub mod table;

pub use fabcheck_core as core;
