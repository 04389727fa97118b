//! File formats, configuration, experiment runners and the acceptance suite
//! for the cell-probe laboratory.

pub mod acceptance;
pub mod config;
pub mod experiments;
pub mod formats;
pub mod manifest;
