//! Reconstruction of realistic, weighted route sets from edge-level traffic
//! flow fields.
//!
//! A flow field assigns a vehicle count to every edge of a directed road
//! network. Given a handful of representative trajectories, the crate builds
//! a basis of routes, each within a bounded strong Fréchet distance of one of
//! the trajectories, plus nonnegative coefficients whose induced edge flow
//! approximates the field in the least-squares sense. Two min-cost-flow
//! baselines (global and multi-commodity) are provided for comparison, along
//! with the evaluation measures and a synthetic ground-truth generator.

pub mod datagen;
pub mod error;
pub mod eval;
pub mod flowopt;
pub mod geometry;
pub mod mapmatch;
pub mod network;
pub mod reconstruct;

pub use error::{Error, Result};
pub use geometry::{FreeInterval, Point, Trajectory};
pub use network::{CorridorSubgraph, FlowField, ResidualField, RoadNetwork};
pub use reconstruct::{Reconstruction, Route};
