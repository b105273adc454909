//! Spatial stage: forward evaluation of the planar predicates into poses,
//! the overlap/boundary penalty, and coordinate-descent refinement of the
//! numeric predicate parameters.

mod apply;
mod optimize;
mod penalty;

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Point2, Point3};

pub use apply::{apply_predicates, Layout, ParamEntry, ParamKind, ParamVector, SpatialProblem};
pub use optimize::{optimize, DescentStep, OptimizeConfig, SolvedLayout, SolverFailure};
pub use penalty::{boundary_violation, penalty, penalty_breakdown, world_footprint, Violation};

/// Wraps an angle into [0, 2π).
pub fn normalize_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Smallest absolute difference between two angles.
pub fn angle_distance(a: f64, b: f64) -> f64 {
    let d = normalize_angle(a - b);
    d.min(TAU - d)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Point3,
    /// Radians in [0, 2π).
    pub yaw: f64,
}

impl Default for Pose {
    fn default() -> Self {
        Self {
            position: Point3::origin(),
            yaw: 0.0,
        }
    }
}

impl Pose {
    pub fn new(x: f64, y: f64, z: f64, yaw: f64) -> Self {
        Self {
            position: Point3::new(x, y, z),
            yaw: normalize_angle(yaw),
        }
    }

    pub fn xy(&self) -> Point2 {
        Point2::new(self.position.x, self.position.y)
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|v| v.is_finite()) && self.yaw.is_finite()
    }
}

/// Extent of the supporting surface ("root") and the height of its top.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds2D {
    pub min_x: f64,
    pub max_x: f64,
    pub min_y: f64,
    pub max_y: f64,
    pub top_z: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("bounds need min < max on both axes")]
pub struct InvalidBounds;

impl Bounds2D {
    pub fn new(
        min_x: f64,
        max_x: f64,
        min_y: f64,
        max_y: f64,
        top_z: f64,
    ) -> Result<Self, InvalidBounds> {
        let ok = [min_x, max_x, min_y, max_y, top_z]
            .iter()
            .all(|v| v.is_finite())
            && min_x < max_x
            && min_y < max_y;
        ok.then_some(Self {
            min_x,
            max_x,
            min_y,
            max_y,
            top_z,
        })
        .ok_or(InvalidBounds)
    }

    pub fn depth(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn width(&self) -> f64 {
        self.max_y - self.min_y
    }

    pub fn shortest_side(&self) -> f64 {
        self.depth().min(self.width())
    }

    pub fn area(&self) -> f64 {
        self.depth() * self.width()
    }

    pub fn center(&self) -> Point2 {
        Point2::new(
            0.5 * (self.min_x + self.max_x),
            0.5 * (self.min_y + self.max_y),
        )
    }

    /// CCW rectangle.
    pub fn polygon(&self) -> Vec<Point2> {
        vec![
            Point2::new(self.min_x, self.min_y),
            Point2::new(self.max_x, self.min_y),
            Point2::new(self.max_x, self.max_y),
            Point2::new(self.min_x, self.max_y),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpatialError {
    #[error("object `{0}` is read before its position or yaw is determined")]
    UnsolvedObject(String),
    #[error("no asset can be retrieved for `{0}`")]
    Retrieval(String),
    #[error("unknown object or group `{0}`")]
    UnknownEntity(String),
    #[error("the spatial penalty stayed at {} after optimization", .0.penalty)]
    Failure(Box<SolverFailure>),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angles_wrap_into_range() {
        assert_eq!(
            normalize_angle(-std::f64::consts::FRAC_PI_2),
            1.5 * std::f64::consts::PI
        );
        assert_eq!(normalize_angle(TAU), 0.0);
        assert!(angle_distance(0.1, TAU - 0.1) < 0.2 + 1e-12);
    }

    #[test]
    fn bounds_validate() {
        assert!(Bounds2D::new(0.0, 1.0, 0.0, 1.0, 0.0).is_ok());
        assert!(Bounds2D::new(1.0, 1.0, 0.0, 1.0, 0.0).is_err());
    }
}
