//! Multi-robot frontier exploration under communication-range constraints.
//!
//! A team of simulated robots maps an unknown world by repeatedly sensing,
//! merging local occupancy grids, extracting frontier components, and
//! choosing goals through a fixed hierarchy: each robot either inherits a
//! relay pose imposed from above, picks the best frontier it can trace back
//! to the WiFi source through other frontier points, or arranges a fireline
//! of relays along the shortest path home. The simulator is deterministic for
//! a fixed configuration and seed.

pub mod config;
pub mod coordination;
pub mod error;
pub mod frontier;
pub mod grid;
pub mod nav;
pub mod pgm;
pub mod render;
pub mod selftest;
pub mod sensing;
pub mod sim;
pub mod trace;

pub use error::{Error, Result};
pub use grid::{
    completion_percentage, load_world, merge_maps, CellState, GridGeometry, GridIndex,
    GroundTruthWorld, OccupancyGrid, Pose,
};
