//! Placed objects with their physical parameters, and the versioned scene
//! file written by the command-line tools.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::catalog::{AssetRecord, Catalog};
use crate::geometry::{Footprint, Point3, Vector3};
use crate::shape::RigidTransform;
use crate::spatial::{Bounds2D, Pose};

pub const SCENE_FILE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacedObject {
    pub id: String,
    pub asset_id: String,
    pub pose: Pose,
    /// kg
    pub mass: f64,
    pub friction: f64,
    /// Offset of the centre of mass from the solid's centroid, in the object frame.
    pub com_shift: Vector3,
    /// Axis–angle rotation applied after the yaw; zero for upright objects.
    #[serde(default = "Vector3::zeros", skip_serializing_if = "is_zero")]
    pub tilt: Vector3,
}

fn is_zero(v: &Vector3) -> bool {
    v.iter().all(|&c| c == 0.0)
}

impl PlacedObject {
    /// Upright object with the asset's nominal physical parameters.
    pub fn nominal(id: &str, asset: &AssetRecord, pose: Pose) -> Self {
        Self {
            id: id.to_string(),
            asset_id: asset.id.clone(),
            pose,
            mass: asset.nominal_mass(),
            friction: asset.nominal_friction(),
            com_shift: asset.nominal_com_shift(),
            tilt: Vector3::zeros(),
        }
    }

    pub fn transform(&self, asset: &AssetRecord) -> RigidTransform {
        RigidTransform::from_pose(&self.pose, asset.front_yaw, Some(self.tilt))
    }

    /// World position of the centre of mass.
    pub fn world_com(&self, asset: &AssetRecord) -> Point3 {
        self.transform(asset)
            .apply(&(asset.shape.local_centroid() + self.com_shift))
    }

    /// World footprint, ignoring tilt.
    pub fn footprint(&self, asset: &AssetRecord) -> Footprint {
        crate::spatial::world_footprint(asset, &self.pose)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SceneError {
    #[error("object `{0}` refers to asset `{1}` which is not in the catalog")]
    UnknownAsset(String, String),
    #[error("duplicate object id `{0}`")]
    DuplicateId(String),
}

/// Objects on a supporting surface, in placement order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneState {
    pub bounds: Bounds2D,
    pub objects: Vec<PlacedObject>,
}

impl SceneState {
    pub fn new(bounds: Bounds2D) -> Self {
        Self {
            bounds,
            objects: Vec::new(),
        }
    }

    pub fn get(&self, id: &str) -> Option<&PlacedObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn get_mut(&mut self, id: &str) -> Option<&mut PlacedObject> {
        self.objects.iter_mut().find(|o| o.id == id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.get(id).is_some()
    }

    pub fn push(&mut self, object: PlacedObject) -> Result<(), SceneError> {
        if self.contains(&object.id) {
            return Err(SceneError::DuplicateId(object.id));
        }
        self.objects.push(object);
        Ok(())
    }

    pub fn remove(&mut self, id: &str) -> Option<PlacedObject> {
        let idx = self.objects.iter().position(|o| o.id == id)?;
        Some(self.objects.remove(idx))
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    /// Checks that every object's asset exists.
    pub fn check_assets(&self, catalog: &Catalog) -> Result<(), SceneError> {
        for o in &self.objects {
            if catalog.get(&o.asset_id).is_none() {
                return Err(SceneError::UnknownAsset(o.id.clone(), o.asset_id.clone()));
            }
        }
        Ok(())
    }

    /// Pairs each object with its asset.
    ///
    /// Panics if an asset is missing; call [`SceneState::check_assets`] on
    /// untrusted scenes first.
    pub fn with_assets<'a>(
        &'a self,
        catalog: &'a Catalog,
    ) -> impl Iterator<Item = (&'a PlacedObject, &'a AssetRecord)> + 'a {
        self.objects.iter().map(move |o| {
            (
                o,
                catalog
                    .get(&o.asset_id)
                    .expect("scene assets come from the catalog"),
            )
        })
    }

    /// Smallest free `{category}_{n}` id.
    pub fn next_id(&self, category: &str) -> String {
        (0..)
            .map(|n| format!("{category}_{n}"))
            .find(|id| !self.contains(id))
            .expect("unbounded range")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// SHA-256 of the canonical program text, hex.
    pub program_hash: String,
    pub seed: u64,
    pub solver_config: serde_json::Value,
}

pub fn program_hash(program_text: &str) -> String {
    Sha256::digest(program_text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneFile {
    pub version: u32,
    pub bounds: Bounds2D,
    pub objects: Vec<ObjectRecord>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectRecord {
    pub id: String,
    pub asset_id: String,
    pub position: [f64; 3],
    pub yaw: f64,
    pub mass: f64,
    pub friction: f64,
    pub com_shift: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tilt: Option<[f64; 3]>,
}

#[derive(Debug, Error)]
pub enum SceneFileError {
    #[error("cannot read or write scene file: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed scene file: {0}")]
    Format(#[from] serde_json::Error),
    #[error("unsupported scene file version {found} (expected {SCENE_FILE_VERSION})")]
    Version { found: u32 },
}

impl SceneFile {
    pub fn from_scene(scene: &SceneState, provenance: Provenance) -> Self {
        let objects = scene
            .objects
            .iter()
            .map(|o| ObjectRecord {
                id: o.id.clone(),
                asset_id: o.asset_id.clone(),
                position: [o.pose.position.x, o.pose.position.y, o.pose.position.z],
                yaw: o.pose.yaw,
                mass: o.mass,
                friction: o.friction,
                com_shift: [o.com_shift.x, o.com_shift.y, o.com_shift.z],
                tilt: (!is_zero(&o.tilt)).then(|| [o.tilt.x, o.tilt.y, o.tilt.z]),
            })
            .collect();
        Self {
            version: SCENE_FILE_VERSION,
            bounds: scene.bounds,
            objects,
            provenance,
        }
    }

    pub fn to_scene(&self) -> SceneState {
        let objects = self
            .objects
            .iter()
            .map(|r| PlacedObject {
                id: r.id.clone(),
                asset_id: r.asset_id.clone(),
                // Stored yaws are already normalized; constructing the pose
                // directly keeps the round trip exact.
                pose: Pose {
                    position: Point3::from(r.position),
                    yaw: r.yaw,
                },
                mass: r.mass,
                friction: r.friction,
                com_shift: Vector3::from(r.com_shift),
                tilt: r.tilt.map(Vector3::from).unwrap_or_else(Vector3::zeros),
            })
            .collect();
        SceneState {
            bounds: self.bounds,
            objects,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("scene files serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, SceneFileError> {
        let v: serde_json::Value = serde_json::from_str(text)?;
        let found = v.get("version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
        if found != SCENE_FILE_VERSION {
            return Err(SceneFileError::Version { found });
        }
        Ok(serde_json::from_value(v)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), SceneFileError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SceneFileError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
