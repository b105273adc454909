use std::io::{BufRead, BufReader, Write};
use std::process::{Command, Stdio};

use serde::{Deserialize, Serialize};

use super::{PhysicsError, SettleResult, SimulationBackend, MAX_DISPLACEMENT};
use crate::catalog::Catalog;
use crate::scene::SceneState;
use crate::shape::{Primitive, Shape};
use crate::spatial::{Bounds2D, Pose};

/// Solid geometry as sent to an external engine: a primitive descriptor, or
/// an inline triangle mesh in the asset frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ShapeDesc {
    Primitive(Primitive),
    Mesh {
        vertices: Vec<[f64; 3]>,
        faces: Vec<[usize; 3]>,
    },
}

impl From<&Shape> for ShapeDesc {
    fn from(s: &Shape) -> Self {
        match s {
            Shape::Primitive(p) => ShapeDesc::Primitive(p.clone()),
            Shape::Mesh(m) => ShapeDesc::Mesh {
                vertices: m.vertices.iter().map(|v| [v.x, v.y, v.z]).collect(),
                faces: m.faces.clone(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodySnapshot {
    pub id: String,
    pub shape: ShapeDesc,
    /// Extra yaw that turns the asset's front towards +x.
    pub front_yaw: f64,
    pub pose: Pose,
    pub tilt: [f64; 3],
    pub mass: f64,
    pub friction: f64,
    pub com_shift: [f64; 3],
}

/// One settle request line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSnapshot {
    pub bounds: Bounds2D,
    pub steps: usize,
    pub objects: Vec<BodySnapshot>,
}

impl SceneSnapshot {
    pub fn new(scene: &SceneState, catalog: &Catalog, steps: usize) -> Result<Self, PhysicsError> {
        let objects = scene
            .objects
            .iter()
            .map(|o| {
                let asset = catalog
                    .get(&o.asset_id)
                    .ok_or_else(|| PhysicsError::UnknownAsset(o.id.clone()))?;
                Ok(BodySnapshot {
                    id: o.id.clone(),
                    shape: ShapeDesc::from(&asset.shape),
                    front_yaw: asset.front_yaw,
                    pose: o.pose,
                    tilt: [o.tilt.x, o.tilt.y, o.tilt.z],
                    mass: o.mass,
                    friction: o.friction,
                    com_shift: [o.com_shift.x, o.com_shift.y, o.com_shift.z],
                })
            })
            .collect::<Result<_, PhysicsError>>()?;
        Ok(Self {
            bounds: scene.bounds,
            steps,
            objects,
        })
    }
}

/// Backend that runs an external engine once per settle call: the request
/// snapshot is written as one JSON line to its stdin and one JSON
/// [`SettleResult`] line is read back from its stdout.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessBackend {
    pub program: String,
    pub args: Vec<String>,
}

impl ProcessBackend {
    pub fn new(
        program: impl Into<String>,
        args: impl IntoIterator<Item = impl Into<String>>,
    ) -> Self {
        Self {
            program: program.into(),
            args: args.into_iter().map(Into::into).collect(),
        }
    }

    fn check(&self, scene: &SceneState, mut r: SettleResult) -> Result<SettleResult, PhysicsError> {
        if r.objects.len() != scene.len()
            || r.objects
                .iter()
                .zip(&scene.objects)
                .any(|(b, o)| b.id != o.id)
        {
            return Err(PhysicsError::Protocol(
                "response objects do not match the request".into(),
            ));
        }
        for b in &mut r.objects {
            if !b.displacement.is_finite() || b.displacement < 0.0 {
                return Err(PhysicsError::Protocol(format!(
                    "invalid displacement for `{}`",
                    b.id
                )));
            }
            b.displacement = b.displacement.min(MAX_DISPLACEMENT);
        }
        Ok(r)
    }
}

impl SimulationBackend for ProcessBackend {
    fn settle(
        &self,
        scene: &SceneState,
        catalog: &Catalog,
        steps: usize,
    ) -> Result<SettleResult, PhysicsError> {
        let request = serde_json::to_string(&SceneSnapshot::new(scene, catalog, steps)?)
            .expect("snapshots serialize");
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| PhysicsError::Process(format!("cannot start `{}`: {e}", self.program)))?;
        {
            let mut stdin = child.stdin.take().expect("stdin is piped");
            stdin
                .write_all(request.as_bytes())
                .and_then(|_| stdin.write_all(b"\n"))
                .map_err(|e| PhysicsError::Process(e.to_string()))?;
        }
        let mut line = String::new();
        BufReader::new(child.stdout.take().expect("stdout is piped"))
            .read_line(&mut line)
            .map_err(|e| PhysicsError::Process(e.to_string()))?;
        let status = child
            .wait()
            .map_err(|e| PhysicsError::Process(e.to_string()))?;
        if line.trim().is_empty() {
            return Err(PhysicsError::Process(format!(
                "no response (exit status {status})"
            )));
        }
        let result: SettleResult =
            serde_json::from_str(line.trim()).map_err(|e| PhysicsError::Protocol(e.to_string()))?;
        self.check(scene, result)
    }
}
