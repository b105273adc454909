//! Settling and stand/fall labelling of scenes.
//!
//! [`SimulationBackend`] is the extension point: the solvers and the
//! stability estimator only ever ask a backend to settle a scene. The
//! built-in [`QuasiStatic`] backend drops bodies onto their supports on a
//! voxel lattice and then checks statics; [`ProcessBackend`] forwards the
//! same request to an external engine over JSON lines.

mod process;
mod quasi_static;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::Catalog;
use crate::scene::SceneState;
use crate::spatial::Pose;

pub use process::{BodySnapshot, ProcessBackend, SceneSnapshot, ShapeDesc};
pub use quasi_static::QuasiStatic;

/// Step count used when measuring settle distance.
pub const DEFAULT_SETTLE_STEPS: usize = 400;

/// Displacements are clamped to this many meters.
pub const MAX_DISPLACEMENT: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodyResult {
    pub id: String,
    /// Meters from the initial pose, in [0, 1].
    pub displacement: f64,
    pub fell: bool,
    /// Settled pose of a body that did not fall.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pose: Option<Pose>,
}

/// A supporter → supported edge; the surface is named [`crate::dsl::ROOT`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SupportEdge {
    pub supporter: String,
    pub supported: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SettleResult {
    /// One entry per scene object, in scene order.
    pub objects: Vec<BodyResult>,
    #[serde(default)]
    pub support: Vec<SupportEdge>,
}

impl SettleResult {
    pub fn get(&self, id: &str) -> Option<&BodyResult> {
        self.objects.iter().find(|b| b.id == id)
    }

    pub fn any_fell(&self) -> bool {
        self.objects.iter().any(|b| b.fell)
    }

    pub fn max_displacement(&self) -> f64 {
        self.objects
            .iter()
            .map(|b| b.displacement)
            .fold(0.0, f64::max)
    }

    /// Mean clamped displacement; 0 for an empty scene.
    pub fn mean_displacement(&self) -> f64 {
        if self.objects.is_empty() {
            return 0.0;
        }
        self.objects
            .iter()
            .map(|b| b.displacement.clamp(0.0, MAX_DISPLACEMENT))
            .sum::<f64>()
            / self.objects.len() as f64
    }

    /// Supporters of `id`.
    pub fn supporters<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.support
            .iter()
            .filter(move |e| e.supported == id)
            .map(|e| e.supporter.as_str())
    }

    /// Scene with settled poses; fallen objects are removed.
    pub fn apply_to(&self, scene: &SceneState) -> SceneState {
        let mut out = SceneState::new(scene.bounds);
        for o in &scene.objects {
            match self.get(&o.id) {
                Some(b) if b.fell => {}
                Some(BodyResult { pose: Some(p), .. }) => {
                    let mut o = o.clone();
                    o.pose = *p;
                    out.objects.push(o);
                }
                _ => out.objects.push(o.clone()),
            }
        }
        out
    }
}

#[derive(Debug, Error)]
pub enum PhysicsError {
    #[error("scene object `{0}` has an asset missing from the catalog")]
    UnknownAsset(String),
    #[error("physics process failed: {0}")]
    Process(String),
    #[error("physics process sent an invalid response: {0}")]
    Protocol(String),
}

/// Something that can let a scene evolve under gravity.
pub trait SimulationBackend: Send + Sync {
    /// Settles the scene for `steps` steps (backend-defined step length) and
    /// reports each object's displacement and whether it fell.
    fn settle(
        &self,
        scene: &SceneState,
        catalog: &Catalog,
        steps: usize,
    ) -> Result<SettleResult, PhysicsError>;
}

/// Mean clamped displacement after settling.
pub fn settle_distance(
    backend: &dyn SimulationBackend,
    scene: &SceneState,
    catalog: &Catalog,
    steps: usize,
) -> Result<f64, PhysicsError> {
    Ok(backend.settle(scene, catalog, steps)?.mean_displacement())
}
