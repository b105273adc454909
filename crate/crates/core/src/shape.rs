//! Solid shapes of assets: analytic primitives and triangle meshes.
//!
//! Local frame: meters, z-up, origin at the centroid of the footprint with
//! the shape resting on z = 0.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{Rotation3, Unit};
use serde::{Deserialize, Serialize};

use crate::geometry::{Point2, Point3, Vector3};
use crate::spatial::Pose;

/// Segments used to approximate round footprints.
pub const ROUND_SEGMENTS: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Primitive {
    Box {
        size: [f64; 3],
    },
    Cylinder {
        radius: f64,
        height: f64,
    },
    Sphere {
        radius: f64,
    },
    /// Box with a floor and four walls of thickness `wall`, open at the top.
    OpenBox {
        size: [f64; 3],
        wall: f64,
    },
    /// Cylinder with a floor and a wall of thickness `wall`, open at the top.
    Tube {
        radius: f64,
        height: f64,
        wall: f64,
    },
}

impl Primitive {
    pub fn is_valid(&self) -> bool {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        match *self {
            Primitive::Box { size } => size.iter().all(|&s| pos(s)),
            Primitive::Cylinder { radius, height } => pos(radius) && pos(height),
            Primitive::Sphere { radius } => pos(radius),
            Primitive::OpenBox { size, wall } => {
                size.iter().all(|&s| pos(s))
                    && pos(wall)
                    && 2.0 * wall < size[0].min(size[1])
                    && wall < size[2]
            }
            Primitive::Tube {
                radius,
                height,
                wall,
            } => pos(radius) && pos(height) && pos(wall) && wall < radius && wall < height,
        }
    }

    /// Strict containment: the point must lie at least `eps` inside.
    pub fn contains(&self, p: &Point3, eps: f64) -> bool {
        let in_box = |p: &Point3, size: [f64; 3]| {
            p.x.abs() < 0.5 * size[0] - eps
                && p.y.abs() < 0.5 * size[1] - eps
                && p.z > eps
                && p.z < size[2] - eps
        };
        let in_cyl = |p: &Point3, r: f64, h: f64| {
            let rr = r - eps;
            rr > 0.0 && p.x * p.x + p.y * p.y < rr * rr && p.z > eps && p.z < h - eps
        };
        match *self {
            Primitive::Box { size } => in_box(p, size),
            Primitive::Cylinder { radius, height } => in_cyl(p, radius, height),
            Primitive::Sphere { radius } => {
                let r = radius - eps;
                r > 0.0 && (p - Point3::new(0.0, 0.0, radius)).norm_squared() < r * r
            }
            Primitive::OpenBox { size, wall } => {
                let in_cavity = p.x.abs() <= 0.5 * size[0] - wall + eps
                    && p.y.abs() <= 0.5 * size[1] - wall + eps
                    && p.z >= wall - eps;
                in_box(p, size) && !in_cavity
            }
            Primitive::Tube {
                radius,
                height,
                wall,
            } => {
                let ri = radius - wall + eps;
                let in_cavity = p.x * p.x + p.y * p.y <= ri * ri && p.z >= wall - eps;
                in_cyl(p, radius, height) && !in_cavity
            }
        }
    }

    pub fn local_aabb(&self) -> (Point3, Point3) {
        match *self {
            Primitive::Box { size } | Primitive::OpenBox { size, .. } => (
                Point3::new(-0.5 * size[0], -0.5 * size[1], 0.0),
                Point3::new(0.5 * size[0], 0.5 * size[1], size[2]),
            ),
            Primitive::Cylinder { radius, height } | Primitive::Tube { radius, height, .. } => (
                Point3::new(-radius, -radius, 0.0),
                Point3::new(radius, radius, height),
            ),
            Primitive::Sphere { radius } => (
                Point3::new(-radius, -radius, 0.0),
                Point3::new(radius, radius, 2.0 * radius),
            ),
        }
    }

    /// (volume, centroid) of the solid.
    pub fn mass_properties(&self) -> (f64, Point3) {
        let solid_minus = |vo: f64, zo: f64, vc: f64, zc: f64| {
            let v = vo - vc;
            (v, Point3::new(0.0, 0.0, (vo * zo - vc * zc) / v))
        };
        match *self {
            Primitive::Box { size } => (
                size[0] * size[1] * size[2],
                Point3::new(0.0, 0.0, 0.5 * size[2]),
            ),
            Primitive::Cylinder { radius, height } => (
                PI * radius * radius * height,
                Point3::new(0.0, 0.0, 0.5 * height),
            ),
            Primitive::Sphere { radius } => (
                4.0 / 3.0 * PI * radius.powi(3),
                Point3::new(0.0, 0.0, radius),
            ),
            Primitive::OpenBox { size, wall } => {
                let vo = size[0] * size[1] * size[2];
                let ch = size[2] - wall;
                let vc = (size[0] - 2.0 * wall) * (size[1] - 2.0 * wall) * ch;
                solid_minus(vo, 0.5 * size[2], vc, wall + 0.5 * ch)
            }
            Primitive::Tube {
                radius,
                height,
                wall,
            } => {
                let vo = PI * radius * radius * height;
                let ri = radius - wall;
                let ch = height - wall;
                let vc = PI * ri * ri * ch;
                solid_minus(vo, 0.5 * height, vc, wall + 0.5 * ch)
            }
        }
    }

    fn footprint_points(&self) -> Vec<Point2> {
        match *self {
            Primitive::Box { size } | Primitive::OpenBox { size, .. } => {
                let (hx, hy) = (0.5 * size[0], 0.5 * size[1]);
                vec![
                    Point2::new(-hx, -hy),
                    Point2::new(hx, -hy),
                    Point2::new(hx, hy),
                    Point2::new(-hx, hy),
                ]
            }
            Primitive::Cylinder { radius, .. }
            | Primitive::Tube { radius, .. }
            | Primitive::Sphere { radius } => (0..ROUND_SEGMENTS)
                .map(|i| {
                    let a = 2.0 * PI * i as f64 / ROUND_SEGMENTS as f64;
                    Point2::new(radius * a.cos(), radius * a.sin())
                })
                .collect(),
        }
    }
}

/// Indexed triangle mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Point3>,
    pub faces: Vec<[usize; 3]>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct ObjError {
    pub line: usize,
    pub message: String,
}

impl TriMesh {
    /// Parses the vertex and face records of a Wavefront OBJ file. Polygons
    /// are fan-triangulated; texture and normal indices are ignored.
    pub fn parse_obj(text: &str) -> Result<TriMesh, ObjError> {
        let mut vertices = Vec::new();
        let mut faces = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            let mut parts = line.split_whitespace();
            let err = |message: &str| ObjError {
                line: n + 1,
                message: message.to_string(),
            };
            match parts.next() {
                Some("v") => {
                    let c: Vec<f64> = parts
                        .take(3)
                        .map(str::parse)
                        .collect::<Result<_, _>>()
                        .map_err(|_| err("bad vertex"))?;
                    if c.len() != 3 {
                        return Err(err("vertex needs three coordinates"));
                    }
                    vertices.push(Point3::new(c[0], c[1], c[2]));
                }
                Some("f") => {
                    let mut idx = Vec::new();
                    for tok in parts {
                        let v: i64 = tok
                            .split('/')
                            .next()
                            .unwrap_or("")
                            .parse()
                            .map_err(|_| err("bad face index"))?;
                        let resolved = if v > 0 {
                            v - 1
                        } else {
                            vertices.len() as i64 + v
                        };
                        if resolved < 0 || resolved as usize >= vertices.len() {
                            return Err(err("face index out of range"));
                        }
                        idx.push(resolved as usize);
                    }
                    if idx.len() < 3 {
                        return Err(err("face needs at least three vertices"));
                    }
                    for k in 1..idx.len() - 1 {
                        faces.push([idx[0], idx[k], idx[k + 1]]);
                    }
                }
                _ => {}
            }
        }
        if faces.is_empty() {
            return Err(ObjError {
                line: 0,
                message: "mesh has no faces".into(),
            });
        }
        Ok(TriMesh { vertices, faces })
    }

    pub fn triangles(&self) -> impl Iterator<Item = [Point3; 3]> + '_ {
        self.faces.iter().map(|f| {
            [
                self.vertices[f[0]],
                self.vertices[f[1]],
                self.vertices[f[2]],
            ]
        })
    }

    /// Closed box mesh in the asset frame convention (base centred on the origin).
    pub fn unit_box(size: [f64; 3]) -> TriMesh {
        let (hx, hy, h) = (0.5 * size[0], 0.5 * size[1], size[2]);
        let vertices = vec![
            Point3::new(-hx, -hy, 0.0),
            Point3::new(hx, -hy, 0.0),
            Point3::new(hx, hy, 0.0),
            Point3::new(-hx, hy, 0.0),
            Point3::new(-hx, -hy, h),
            Point3::new(hx, -hy, h),
            Point3::new(hx, hy, h),
            Point3::new(-hx, hy, h),
        ];
        let faces = vec![
            [0, 2, 1],
            [0, 3, 2],
            [4, 5, 6],
            [4, 6, 7],
            [0, 1, 5],
            [0, 5, 4],
            [1, 2, 6],
            [1, 6, 5],
            [2, 3, 7],
            [2, 7, 6],
            [3, 0, 4],
            [3, 4, 7],
        ];
        TriMesh { vertices, faces }
    }

    #[cfg(test)]
    pub(crate) fn drop_faces(&mut self, n: usize) {
        self.faces.drain(..n);
    }

    fn local_aabb(&self) -> (Point3, Point3) {
        let mut lo = Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut hi = Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (lo, hi)
    }

    /// Signed-tetrahedron volume and centroid; falls back to the vertex mean
    /// for meshes without enclosed volume.
    fn mass_properties(&self) -> (f64, Point3) {
        let mut vol = 0.0;
        let mut acc = Vector3::zeros();
        for [a, b, c] in self.triangles() {
            let v = a.coords.dot(&b.coords.cross(&c.coords)) / 6.0;
            vol += v;
            acc += (a.coords + b.coords + c.coords) * (v / 4.0);
        }
        if vol.abs() > 1e-15 {
            (vol.abs(), Point3::from(acc / vol))
        } else {
            let n = self.vertices.len().max(1) as f64;
            (
                0.0,
                Point3::from(
                    self.vertices
                        .iter()
                        .fold(Vector3::zeros(), |s, v| s + v.coords)
                        / n,
                ),
            )
        }
    }
}

#[derive(Debug, Clone)]
pub enum Shape {
    Primitive(Primitive),
    Mesh(Arc<TriMesh>),
}

impl PartialEq for Shape {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Shape::Primitive(a), Shape::Primitive(b)) => a == b,
            (Shape::Mesh(a), Shape::Mesh(b)) => Arc::ptr_eq(a, b) || a == b,
            _ => false,
        }
    }
}

impl Shape {
    pub fn local_aabb(&self) -> (Point3, Point3) {
        match self {
            Shape::Primitive(p) => p.local_aabb(),
            Shape::Mesh(m) => m.local_aabb(),
        }
    }

    /// Footprint vertices in the local frame (before any rotation).
    pub fn footprint_points(&self) -> Vec<Point2> {
        match self {
            Shape::Primitive(p) => p.footprint_points(),
            Shape::Mesh(m) => m.vertices.iter().map(|v| Point2::new(v.x, v.y)).collect(),
        }
    }

    pub fn volume(&self) -> f64 {
        self.mass_properties().0
    }

    pub fn local_centroid(&self) -> Point3 {
        self.mass_properties().1
    }

    fn mass_properties(&self) -> (f64, Point3) {
        match self {
            Shape::Primitive(p) => p.mass_properties(),
            Shape::Mesh(m) => m.mass_properties(),
        }
    }

    /// Largest horizontal extent and height.
    pub fn extent(&self) -> Vector3 {
        let (lo, hi) = self.local_aabb();
        hi - lo
    }
}

/// World placement of a shape: `world = rotation · local + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Rotation3<f64>,
    pub translation: Vector3,
}

impl RigidTransform {
    /// Rotation is the asset's front alignment and the pose yaw about z,
    /// followed by an optional axis–angle tilt.
    pub fn from_pose(pose: &Pose, front_yaw: f64, tilt: Option<Vector3>) -> Self {
        let yaw =
            Rotation3::from_axis_angle(&Unit::new_unchecked(Vector3::z()), pose.yaw + front_yaw);
        let rotation = match tilt {
            Some(t) if t.norm() > 0.0 => Rotation3::new(t) * yaw,
            _ => yaw,
        };
        Self {
            rotation,
            translation: pose.position.coords,
        }
    }

    pub fn apply(&self, p: &Point3) -> Point3 {
        self.rotation * p + self.translation
    }

    pub fn world_aabb(&self, shape: &Shape) -> (Point3, Point3) {
        let (lo, hi) = shape.local_aabb();
        let mut wlo = Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut whi = Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        if let Shape::Mesh(m) = shape {
            for v in &m.vertices {
                let w = self.apply(v);
                wlo = wlo.inf(&w);
                whi = whi.sup(&w);
            }
            return (wlo, whi);
        }
        for c in 0..8 {
            let p = Point3::new(
                if c & 1 == 0 { lo.x } else { hi.x },
                if c & 2 == 0 { lo.y } else { hi.y },
                if c & 4 == 0 { lo.z } else { hi.z },
            );
            let w = self.apply(&p);
            wlo = wlo.inf(&w);
            whi = whi.sup(&w);
        }
        (wlo, whi)
    }
}
