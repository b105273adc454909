//! Tabletop scene layout from relational predicates.
//!
//! A predicate program names objects, retrieves assets for them, and
//! constrains their placement. The spatial stage resolves planar poses by
//! forward evaluation plus coordinate descent; the physical stage places
//! stacked and contained objects on a voxel grid and validates them with a
//! rigid-body backend.

pub mod agent;
pub mod catalog;
pub mod dsl;
pub mod feedback;
pub mod geometry;
pub mod http;
pub mod physical;
pub mod physics;
pub mod pipeline;
pub mod render;
pub mod rng;
pub mod scene;
pub mod shape;
pub mod spatial;
pub mod stability;
