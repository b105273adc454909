//! Geometric kernel shared by the spatial and physical solvers: 2D convex
//! hulls and overlaps, voxel occupancy grids, grid correlation and the
//! bottom/contact surface masks used for support tests.

mod correlate;
mod polygon;
mod surface;
mod voxel;

pub use correlate::{feasible_offsets, FeasibleSet};
pub use polygon::{
    clip_convex, convex_hull_2d, hull_points, overlap_area, point_in_hull, polygon_area,
    segment_distance, union_area, Footprint,
};
pub use surface::{
    bottom_surface, contact_cells, contact_surface, support_valid, ContactCell, SurfaceMask,
};
pub use voxel::{voxelize, voxelize_on, Lattice, OccupancyGrid};

use thiserror::Error;

pub type Point2 = nalgebra::Point2<f64>;
pub type Point3 = nalgebra::Point3<f64>;
pub type Vector2 = nalgebra::Vector2<f64>;
pub type Vector3 = nalgebra::Vector3<f64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("degenerate input: points are collinear or fewer than three")]
    DegenerateInput,
    #[error("mesh of asset `{0}` is not watertight along z")]
    NonWatertight(String),
    #[error("resolution must be positive, got {0}")]
    BadResolution(f64),
}
