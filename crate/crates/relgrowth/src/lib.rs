//! Scenario runner, file formats and golden-value checks on top of
//! `relgrowth-core`.

pub mod config;
pub mod format;
pub mod golden;
pub mod runner;

pub use relgrowth_core as core;
