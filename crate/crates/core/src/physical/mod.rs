//! Physical stage: stacking (PLACE-ON), free placement (PLACE-ANYWHERE) and
//! containment (PLACE-IN) on a voxel lattice, with every accepted placement
//! checked by a simulation backend.

mod grid;
mod place;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::AssetRecord;
use crate::dsl::Statement;
use crate::geometry::GeometryError;
use crate::physics::PhysicsError;
use crate::spatial::Pose;

pub use grid::{contacts_at_offsets, ContactInfo, ObjectGrid, SceneGrid, OWNER_NONE, OWNER_ROOT};
pub use place::{
    anywhere_candidates, cavity_columns, place_anywhere, place_in, place_items_in, place_on,
    place_on_candidates,
};

/// Lattice resolution for tabletop scenes, meters.
pub const TABLETOP_RESOLUTION: f64 = 0.01;
/// Lattice resolution for floor-scale scenes, meters.
pub const GROUND_RESOLUTION: f64 = 0.03;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridParams {
    pub resolution: f64,
    pub k_bottom: usize,
    pub k_search: usize,
    /// Ranked candidates handed to the backend before giving up.
    pub max_physics_tries: usize,
    /// Largest accepted settle displacement, in voxels.
    pub tolerance_voxels: f64,
    /// Drops per container item before it is reported as failed.
    pub drop_retries: usize,
}

impl Default for GridParams {
    fn default() -> Self {
        Self {
            resolution: TABLETOP_RESOLUTION,
            k_bottom: 1,
            k_search: 1,
            max_physics_tries: 20,
            tolerance_voxels: 2.0,
            drop_retries: 20,
        }
    }
}

impl GridParams {
    pub fn tolerance(&self) -> f64 {
        self.tolerance_voxels * self.resolution
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityTarget {
    Stable,
    Unstable,
}

/// Optional PLACE-ON parameters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PlaceParams {
    pub x_offset: Option<f64>,
    pub y_offset: Option<f64>,
    pub overlap: Option<f64>,
    pub stability: Option<StabilityTarget>,
}

impl PlaceParams {
    pub fn from_statement(s: &Statement) -> Self {
        Self {
            x_offset: s.number("x_offset"),
            y_offset: s.number("y_offset"),
            overlap: s.number("overlap"),
            stability: match s.string("stability") {
                Some("stable") => Some(StabilityTarget::Stable),
                Some("unstable") => Some(StabilityTarget::Unstable),
                _ => None,
            },
        }
    }
}

/// One object to place on a target (or anywhere).
#[derive(Debug, Clone)]
pub struct PlacementRequest<'a> {
    pub id: String,
    pub asset: &'a AssetRecord,
    pub yaw: f64,
    /// Supporting object id, or `root` for the surface.
    pub target: String,
    pub params: PlaceParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementCandidate {
    /// Offset of the object grid in the scene grid.
    pub offset: [usize; 3],
    /// Pose before settling.
    pub pose: Pose,
    pub support_ratio: f64,
    /// Distance from the nominal centre of mass to the edge of the contact hull, meters.
    pub edge_distance: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementOutcome {
    /// Settled pose.
    pub pose: Pose,
    pub candidate: PlacementCandidate,
    pub candidates: usize,
    /// Candidates run through the backend, the accepted one included.
    pub tried: usize,
}

#[derive(Debug, Error)]
pub enum PhysicalError {
    #[error("placement target `{0}` is not in the scene")]
    UnknownTarget(String),
    #[error("`{0}` cannot support other objects")]
    TargetNotSupporting(String),
    #[error("no feasible placement for `{object}` on `{target}` ({feasible_offsets} collision-free offsets, none supported)")]
    NoFeasiblePlacement {
        object: String,
        target: String,
        feasible_offsets: usize,
    },
    #[error("all {tried} simulated placements of `{object}` on `{target}` moved or fell ({candidates} candidates)")]
    PhysicsRejection {
        object: String,
        target: String,
        tried: usize,
        candidates: usize,
    },
    #[error("container `{0}` has no open cavity")]
    ContainerHasNoCavity(String),
    #[error("only {} of {} items could be placed in `{container}`", .placed.len(), .placed.len() + .failed.len())]
    BatchPartiallyPlaced {
        container: String,
        placed: Vec<String>,
        failed: Vec<String>,
    },
    #[error("no asset matches category `{0}`")]
    Retrieval(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Physics(#[from] PhysicsError),
}

impl PhysicalError {
    /// Object the failure is about.
    pub fn object(&self) -> Option<&str> {
        match self {
            PhysicalError::NoFeasiblePlacement { object, .. }
            | PhysicalError::PhysicsRejection { object, .. } => Some(object),
            PhysicalError::UnknownTarget(id)
            | PhysicalError::TargetNotSupporting(id)
            | PhysicalError::ContainerHasNoCavity(id) => Some(id),
            PhysicalError::BatchPartiallyPlaced { container, .. } => Some(container),
            _ => None,
        }
    }
}
