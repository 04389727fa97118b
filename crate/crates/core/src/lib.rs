//! Cell-probe laboratory for dynamic range counting.
//!
//! The crate simulates the cell-probe model with epoch-tagged memory, builds
//! the hard update distributions for an artificial inner-product problem and
//! for two-dimensional orthogonal range counting, measures the per-epoch
//! probe profile, and plays the encoder/decoder game that bounds it.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod chronogram;
pub mod error;
pub mod family;
pub mod field;
pub mod game;
pub mod grid;
pub mod lattice;
pub mod memory;
pub mod rng;
pub mod structures;

pub use error::{Error, Result};
