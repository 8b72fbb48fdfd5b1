//! Panoptic occupancy evaluation and baselines on 4D voxel grids.

pub mod cli;
pub mod config;
pub mod error;
pub mod grid;
pub mod infer;
pub mod io;
pub mod labelgen;
pub mod metrics;
pub mod serialization;
pub mod sim;
pub mod splat;
pub mod track;

pub use error::{Error, Result};
