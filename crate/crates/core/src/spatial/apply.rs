use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{normalize_angle, Bounds2D, Pose, SpatialError};
use crate::catalog::{AssetRecord, Catalog};
use crate::dsl::{is_group_id, PredicateProgram, Reference, Relation, Statement, Subject, ROOT};
use crate::geometry::{Footprint, Vector2};
use crate::rng::stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    Distance,
    Angle,
    Coordinate,
}

/// A numeric predicate parameter under optimization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamEntry {
    /// Index of the statement in the program array.
    pub entry: usize,
    pub key: String,
    pub value: f64,
    pub kind: ParamKind,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    pub entries: Vec<ParamEntry>,
}

impl ParamVector {
    pub fn get(&self, entry: usize, key: &str) -> Option<f64> {
        self.entries
            .iter()
            .find(|p| p.entry == entry && p.key == key)
            .map(|p| p.value)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Result of the spatial stage.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Layout {
    /// Poses of objects placed by spatial predicates (copied group members included).
    pub poses: BTreeMap<String, Pose>,
    /// Yaws of objects left to the physical solver.
    pub physical_yaws: BTreeMap<String, f64>,
    /// Object id → asset id.
    pub assets: BTreeMap<String, String>,
}

/// A program bound to assets and a surface, ready for repeated evaluation.
#[derive(Debug, Clone)]
pub struct SpatialProblem<'a> {
    pub program: &'a PredicateProgram,
    pub catalog: &'a Catalog,
    pub bounds: Bounds2D,
    pub seed: u64,
    /// Described object id → asset id.
    pub bindings: BTreeMap<String, String>,
    /// Objects placed by PLACE-ON, PLACE-IN or PLACE-ANYWHERE.
    pub physical: BTreeSet<String>,
    pub initial: ParamVector,
}

impl<'a> SpatialProblem<'a> {
    pub fn new(
        program: &'a PredicateProgram,
        catalog: &'a Catalog,
        bounds: Bounds2D,
        seed: u64,
    ) -> Result<Self, SpatialError> {
        let mut bindings = BTreeMap::new();
        for (id, text) in program.described_objects() {
            let asset = catalog
                .retrieve(&text, catalog.retrieval_threshold)
                .map_err(|_| SpatialError::Retrieval(id.clone()))?;
            bindings.insert(id, asset.id.clone());
        }
        let physical: BTreeSet<String> = bindings
            .keys()
            .filter(|id| program.physical_relation(id).is_some())
            .cloned()
            .collect();

        let mut rng = stream(seed, "random-rot");
        let mut entries = Vec::new();
        for (i, s) in program.statements() {
            let Subject::Id(subject) = &s.subject else {
                continue;
            };
            if physical.contains(subject) {
                continue;
            }
            match &s.relation {
                r if r.is_directional() => entries.push(ParamEntry {
                    entry: i,
                    key: "distance".into(),
                    value: s.number("distance").unwrap_or(0.0),
                    kind: ParamKind::Distance,
                }),
                Relation::PlaceOnBase => {
                    for key in ["x", "y"] {
                        if let Some(v) = s.number(key) {
                            entries.push(ParamEntry {
                                entry: i,
                                key: key.into(),
                                value: v,
                                kind: ParamKind::Coordinate,
                            });
                        }
                    }
                }
                Relation::RandomRot => entries.push(ParamEntry {
                    entry: i,
                    key: "yaw".into(),
                    value: rng.random::<f64>() * TAU,
                    kind: ParamKind::Angle,
                }),
                _ => {}
            }
        }
        Ok(Self {
            program,
            catalog,
            bounds,
            seed,
            bindings,
            physical,
            initial: ParamVector { entries },
        })
    }

    pub fn asset(&self, object: &str) -> Option<&'a AssetRecord> {
        let catalog: &'a Catalog = self.catalog;
        self.bindings.get(object).and_then(|a| catalog.get(a))
    }

    /// Forward evaluation of every statement in program order.
    pub fn apply(&self, params: &ParamVector) -> Result<Layout, SpatialError> {
        let mut ev = Eval {
            problem: self,
            objs: BTreeMap::new(),
            groups: BTreeMap::new(),
            params,
        };
        for (i, s) in self.program.statements() {
            ev.statement(i, s)?;
        }
        let mut layout = Layout::default();
        for (id, o) in &ev.objs {
            layout.assets.insert(id.clone(), o.asset.id.clone());
            if self.physical.contains(id) {
                layout.physical_yaws.insert(
                    id.clone(),
                    o.yaw.unwrap_or_else(|| seeded_yaw(self.seed, id)),
                );
                continue;
            }
            if !(o.det_x && o.det_y) {
                return Err(SpatialError::UnsolvedObject(id.clone()));
            }
            layout.poses.insert(
                id.clone(),
                Pose::new(o.origin.x, o.origin.y, o.z, o.yaw.unwrap_or(0.0)),
            );
        }
        // Described objects without any statement are unsolved.
        for id in self.bindings.keys() {
            if !layout.assets.contains_key(id) {
                return Err(SpatialError::UnsolvedObject(id.clone()));
            }
        }
        Ok(layout)
    }
}

/// Yaw drawn for a physically placed object that has no yaw statement.
pub fn seeded_yaw(seed: u64, id: &str) -> f64 {
    stream(seed, &format!("yaw:{id}")).random::<f64>() * TAU
}

/// Evaluates `program` with `params` on `bounds`; see [`SpatialProblem::apply`].
pub fn apply_predicates(
    program: &PredicateProgram,
    params: Option<&ParamVector>,
    catalog: &Catalog,
    bounds: Bounds2D,
    seed: u64,
) -> Result<Layout, SpatialError> {
    let problem = SpatialProblem::new(program, catalog, bounds, seed)?;
    problem.apply(params.unwrap_or(&problem.initial))
}

#[derive(Debug, Clone)]
struct ObjState<'a> {
    asset: &'a AssetRecord,
    origin: Vector2,
    z: f64,
    yaw: Option<f64>,
    /// Footprint at the current yaw, relative to `origin`.
    fp: Footprint,
    det_x: bool,
    det_y: bool,
}

impl ObjState<'_> {
    fn bbox(&self) -> [f64; 4] {
        let (lo, hi) = self.fp.aabb();
        [
            lo.x + self.origin.x,
            hi.x + self.origin.x,
            lo.y + self.origin.y,
            hi.y + self.origin.y,
        ]
    }

    fn set_yaw(&mut self, yaw: f64) {
        let yaw = normalize_angle(yaw);
        self.yaw = Some(yaw);
        self.fp = self.asset.footprint(yaw);
    }
}

#[derive(Debug, Clone)]
struct GroupState {
    members: Vec<String>,
    anchor: String,
}

struct Eval<'p, 'a> {
    problem: &'p SpatialProblem<'a>,
    objs: BTreeMap<String, ObjState<'a>>,
    groups: BTreeMap<String, GroupState>,
    params: &'p ParamVector,
}

const MIN_X: usize = 0;
const MAX_X: usize = 1;
const MIN_Y: usize = 2;
const MAX_Y: usize = 3;

fn center(b: &[f64; 4]) -> (f64, f64) {
    (0.5 * (b[MIN_X] + b[MAX_X]), 0.5 * (b[MIN_Y] + b[MAX_Y]))
}

fn overlap_1d(a0: f64, a1: f64, b0: f64, b1: f64) -> f64 {
    (a1.min(b1) - a0.max(b0)).max(0.0)
}

impl<'a> Eval<'_, 'a> {
    fn object(&mut self, id: &str) -> Result<&mut ObjState<'a>, SpatialError> {
        if !self.objs.contains_key(id) {
            let asset = self
                .problem
                .asset(id)
                .ok_or_else(|| SpatialError::UnknownEntity(id.to_string()))?;
            self.objs.insert(
                id.to_string(),
                ObjState {
                    asset,
                    origin: Vector2::zeros(),
                    z: self.problem.bounds.top_z,
                    yaw: None,
                    fp: asset.footprint(0.0),
                    det_x: false,
                    det_y: false,
                },
            );
        }
        Ok(self.objs.get_mut(id).expect("inserted above"))
    }

    fn members(&self, id: &str) -> Vec<String> {
        match self.groups.get(id) {
            Some(g) => g.members.clone(),
            None => vec![id.to_string()],
        }
    }

    /// Axis-aligned bounds of an entity, checking the requested axes are determined.
    fn bbox(&mut self, id: &str, need_x: bool, need_y: bool) -> Result<[f64; 4], SpatialError> {
        if id == ROOT {
            let b = self.problem.bounds;
            return Ok([b.min_x, b.max_x, b.min_y, b.max_y]);
        }
        let mut out = [
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
        ];
        for m in self.members(id) {
            let o = self.object(&m)?;
            if (need_x && !o.det_x) || (need_y && !o.det_y) {
                return Err(SpatialError::UnsolvedObject(m));
            }
            let b = o.bbox();
            out = [
                out[0].min(b[0]),
                out[1].max(b[1]),
                out[2].min(b[2]),
                out[3].max(b[3]),
            ];
        }
        Ok(out)
    }

    fn yaw(&mut self, id: &str) -> Result<f64, SpatialError> {
        if id == ROOT {
            return Ok(0.0);
        }
        let anchor = self
            .groups
            .get(id)
            .map(|g| g.anchor.clone())
            .unwrap_or_else(|| id.to_string());
        self.object(&anchor)?
            .yaw
            .ok_or(SpatialError::UnsolvedObject(anchor))
    }

    fn translate(&mut self, id: &str, dx: f64, dy: f64) -> Result<(), SpatialError> {
        for m in self.members(id) {
            let o = self.object(&m)?;
            o.origin += Vector2::new(dx, dy);
        }
        Ok(())
    }

    fn mark(&mut self, id: &str, x: bool, y: bool) -> Result<(), SpatialError> {
        for m in self.members(id) {
            let o = self.object(&m)?;
            o.det_x |= x;
            o.det_y |= y;
        }
        Ok(())
    }

    /// Sets one bbox side (or the centre) of `id` along an axis by translating it.
    fn set_side(&mut self, id: &str, side: Side, value: f64) -> Result<(), SpatialError> {
        let b = self.bbox(id, false, false)?;
        let (cx, cy) = center(&b);
        let (dx, dy) = match side {
            Side::MinX => (value - b[MIN_X], 0.0),
            Side::MaxX => (value - b[MAX_X], 0.0),
            Side::CenterX => (value - cx, 0.0),
            Side::MinY => (0.0, value - b[MIN_Y]),
            Side::MaxY => (0.0, value - b[MAX_Y]),
            Side::CenterY => (0.0, value - cy),
        };
        self.translate(id, dx, dy)?;
        let on_x = matches!(side, Side::MinX | Side::MaxX | Side::CenterX);
        self.mark(id, on_x, !on_x)
    }

    /// Sets the yaw of an object, or rotates a group rigidly about its
    /// anchor's position.
    fn set_yaw(&mut self, id: &str, yaw: f64) -> Result<(), SpatialError> {
        let Some(g) = self.groups.get(id).cloned() else {
            self.object(id)?.set_yaw(yaw);
            return Ok(());
        };
        let delta = yaw - self.yaw(id)?;
        let pivot = self.object(&g.anchor)?.origin;
        let (s, c) = delta.sin_cos();
        for m in &g.members {
            let o = self.object(m)?;
            let r = o.origin - pivot;
            o.origin = pivot + Vector2::new(c * r.x - s * r.y, s * r.x + c * r.y);
            let old = o.yaw.unwrap_or(0.0);
            o.set_yaw(old + delta);
        }
        Ok(())
    }

    fn statement(&mut self, i: usize, s: &Statement) -> Result<(), SpatialError> {
        let subject = match &s.subject {
            Subject::Id(id) => id.as_str(),
            Subject::Batch(_) => return Ok(()),
        };
        let reference = s.reference.id().unwrap_or(ROOT);
        let physical = !is_group_id(subject) && self.problem.physical.contains(subject);
        if physical {
            // Only rotations that ignore positions apply to physically placed objects.
            if s.relation.is_pure_rotation() {
                self.object(subject)?;
                let yaw = self.rotation_target(i, subject, reference, &s.relation)?;
                self.set_yaw(subject, yaw)?;
            } else {
                self.object(subject)?;
            }
            return Ok(());
        }
        let params = self.params;
        let distance = || {
            params
                .get(i, "distance")
                .unwrap_or_else(|| s.number("distance").unwrap_or(0.0))
        };
        use Relation::*;
        match &s.relation {
            LeftOf => {
                let d = distance();
                let b = self.bbox(reference, false, true)?;
                self.set_side(subject, Side::MinY, b[MAX_Y] + d)
            }
            RightOf => {
                let d = distance();
                let b = self.bbox(reference, false, true)?;
                self.set_side(subject, Side::MaxY, b[MIN_Y] - d)
            }
            FrontOf => {
                let d = distance();
                let b = self.bbox(reference, true, false)?;
                self.set_side(subject, Side::MinX, b[MAX_X] + d)
            }
            BackOf => {
                let d = distance();
                let b = self.bbox(reference, true, false)?;
                self.set_side(subject, Side::MaxX, b[MIN_X] - d)
            }
            AlignCenterLr => {
                let b = self.bbox(reference, false, true)?;
                self.set_side(subject, Side::CenterY, center(&b).1)
            }
            AlignCenterFb => {
                let b = self.bbox(reference, true, false)?;
                self.set_side(subject, Side::CenterX, center(&b).0)
            }
            AlignLeft => {
                let b = self.bbox(reference, false, true)?;
                self.set_side(subject, Side::MaxY, b[MAX_Y])
            }
            AlignRight => {
                let b = self.bbox(reference, false, true)?;
                self.set_side(subject, Side::MinY, b[MIN_Y])
            }
            AlignFront => {
                let b = self.bbox(reference, true, false)?;
                self.set_side(subject, Side::MaxX, b[MAX_X])
            }
            AlignBack => {
                let b = self.bbox(reference, true, false)?;
                self.set_side(subject, Side::MinX, b[MIN_X])
            }
            SymmetryAlong => {
                let c_id = s.string("C").unwrap_or(ROOT).to_string();
                let (bx, by) = center(&self.bbox(reference, true, true)?);
                let (cx, cy) = center(&self.bbox(&c_id, true, true)?);
                self.set_side(subject, Side::CenterX, 2.0 * cx - bx)?;
                self.set_side(subject, Side::CenterY, 2.0 * cy - by)
            }
            FacingTo | FacingSameAs | FacingOppositeTo | FacingFront | FacingBack | FacingLeft
            | FacingRight | RandomRot => {
                let yaw = self.rotation_target(i, subject, reference, &s.relation)?;
                self.set_yaw(subject, yaw)
            }
            OrientByRelativeSide | SideScaleAlign => {
                let b = self.bbox(reference, true, true)?;
                self.bbox(subject, true, true)?;
                let default_yaw = 0.0;
                let score = |this: &mut Self, yaw: f64| -> Result<f64, SpatialError> {
                    this.set_yaw(subject, yaw)?;
                    let a = this.bbox(subject, false, false)?;
                    Ok(overlap_1d(a[MIN_X], a[MAX_X], b[MIN_X], b[MAX_X])
                        + overlap_1d(a[MIN_Y], a[MAX_Y], b[MIN_Y], b[MAX_Y]))
                };
                let s1 = score(self, default_yaw)?;
                let s2 = score(self, default_yaw + FRAC_PI_2)?;
                self.set_yaw(
                    subject,
                    if s1 > s2 {
                        default_yaw
                    } else {
                        default_yaw + FRAC_PI_2
                    },
                )
            }
            PlaceOnBase => {
                let top = self.problem.bounds.top_z;
                for m in self.members(subject) {
                    self.object(&m)?.z = top;
                }
                if let Some(x) = self.params.get(i, "x").or_else(|| s.number("x")) {
                    self.set_side(subject, Side::CenterX, x)?;
                }
                if let Some(y) = self.params.get(i, "y").or_else(|| s.number("y")) {
                    self.set_side(subject, Side::CenterY, y)?;
                }
                Ok(())
            }
            Group => {
                let Reference::Members(members) = &s.reference else {
                    return Ok(());
                };
                let anchor = s
                    .string("anchor")
                    .unwrap_or_else(|| members.first().map(String::as_str).unwrap_or(ROOT))
                    .to_string();
                for m in members {
                    self.object(m)?;
                }
                self.groups.insert(
                    subject.to_string(),
                    GroupState {
                        members: members.clone(),
                        anchor,
                    },
                );
                Ok(())
            }
            CopyGroup => {
                let src = self
                    .groups
                    .get(reference)
                    .cloned()
                    .ok_or_else(|| SpatialError::UnknownEntity(reference.to_string()))?;
                let mut clones = Vec::with_capacity(src.members.len());
                for m in &src.members {
                    let mut o = self.object(m)?.clone();
                    o.det_x = false;
                    o.det_y = false;
                    let id = format!("{m}-{subject}");
                    self.objs.insert(id.clone(), o);
                    clones.push(id);
                }
                let anchor = format!("{}-{subject}", src.anchor);
                self.groups.insert(
                    subject.to_string(),
                    GroupState {
                        members: clones,
                        anchor,
                    },
                );
                Ok(())
            }
            PlaceOn | PlaceIn | PlaceAnywhere | Unknown(_) => Ok(()),
        }
    }

    fn rotation_target(
        &mut self,
        i: usize,
        subject: &str,
        reference: &str,
        rel: &Relation,
    ) -> Result<f64, SpatialError> {
        use Relation::*;
        Ok(match rel {
            FacingTo => {
                let (ax, ay) = center(&self.bbox(subject, true, true)?);
                let (bx, by) = center(&self.bbox(reference, true, true)?);
                (by - ay).atan2(bx - ax)
            }
            FacingSameAs => self.yaw(reference)?,
            FacingOppositeTo => self.yaw(reference)? + PI,
            FacingFront => 0.0,
            FacingBack => PI,
            FacingLeft => FRAC_PI_2,
            FacingRight => -FRAC_PI_2,
            RandomRot => match self.params.get(i, "yaw") {
                Some(v) => v,
                None => seeded_yaw(self.problem.seed, &format!("{subject}#{i}")),
            },
            _ => unreachable!("not a rotation relation"),
        })
    }
}

#[derive(Debug, Clone, Copy)]
enum Side {
    MinX,
    MaxX,
    CenterX,
    MinY,
    MaxY,
    CenterY,
}
