use std::collections::{BTreeMap, BTreeSet, HashMap};

use nalgebra::{Matrix3, Vector3 as NVector3};

use super::{
    BodyResult, PhysicsError, SettleResult, SimulationBackend, SupportEdge, MAX_DISPLACEMENT,
};
use crate::catalog::{AssetRecord, Catalog};
use crate::dsl::ROOT;
use crate::geometry::{hull_points, point_in_hull, voxelize_on, Lattice, Point2, Point3};
use crate::scene::{PlacedObject, SceneState};

const ROOT_OWNER: u32 = u32::MAX;

/// Quasi-static reference backend.
///
/// Bodies are voxelized on a lattice whose planes pass through the surface
/// top, dropped straight down onto whatever lies below them (lowest body
/// first), and then checked bottom-up: a body stands if all its supporters
/// stand, the centre of mass of everything it carries projects inside its
/// support polygon, and its support is not steeper than its friction allows.
/// The step count is ignored; every call runs to rest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuasiStatic {
    pub resolution: f64,
}

impl Default for QuasiStatic {
    fn default() -> Self {
        Self { resolution: 0.01 }
    }
}

impl QuasiStatic {
    pub fn new(resolution: f64) -> Self {
        Self { resolution }
    }
}

struct Body {
    voxels: Vec<[i64; 3]>,
    /// Lattice layer of the lowest voxel.
    bottom: i64,
    /// Extra layers below a column's lowest voxel that still count as touching,
    /// for bottoms made uneven by tilt.
    band: i64,
    mass: f64,
    friction: f64,
    com: Point3,
}

#[derive(Debug, Clone, Copy)]
struct Contact {
    i: i64,
    j: i64,
    /// Layer of the supporting voxel.
    k: i64,
    owner: u32,
}

/// Occupied voxels of the surface slab and settled bodies, per column.
struct Env {
    table: [i64; 2],
    cols: HashMap<(i64, i64), Vec<(i64, u32)>>,
}

impl Env {
    fn is_table(&self, i: i64, j: i64) -> bool {
        (0..self.table[0]).contains(&i) && (0..self.table[1]).contains(&j)
    }

    fn owner_at(&self, i: i64, j: i64, k: i64) -> Option<u32> {
        if k == -1 && self.is_table(i, j) {
            return Some(ROOT_OWNER);
        }
        let col = self.cols.get(&(i, j))?;
        col.binary_search_by_key(&k, |e| e.0).ok().map(|n| col[n].1)
    }

    /// Highest occupied layer strictly below `k`.
    fn below(&self, i: i64, j: i64, k: i64) -> Option<i64> {
        let from_col = self.cols.get(&(i, j)).and_then(|col| {
            let n = col.partition_point(|e| e.0 < k);
            (n > 0).then(|| col[n - 1].0)
        });
        let root = (k > -1 && self.is_table(i, j)).then_some(-1);
        from_col.max(root)
    }

    fn insert(&mut self, v: [i64; 3], owner: u32) {
        let col = self.cols.entry((v[0], v[1])).or_default();
        let n = col.partition_point(|e| e.0 < v[2]);
        col.insert(n, (v[2], owner));
    }
}

impl QuasiStatic {
    fn lattice(&self, scene: &SceneState) -> Result<Lattice, PhysicsError> {
        let b = scene.bounds;
        Lattice::new(Point3::new(b.min_x, b.min_y, b.top_z), self.resolution)
            .map_err(|e| PhysicsError::Process(e.to_string()))
    }

    fn body(
        &self,
        lattice: &Lattice,
        o: &PlacedObject,
        asset: &AssetRecord,
    ) -> Result<Body, PhysicsError> {
        let res = self.resolution;
        let xf = o.transform(asset);
        let grid = voxelize_on(&asset.shape, &xf, lattice, &o.id)
            .map_err(|e| PhysicsError::Process(e.to_string()))?;
        let g0 = grid.origin();
        let base = [0, 1, 2].map(|a| ((g0[a] - lattice.origin[a]) / res).round() as i64);
        let voxels: Vec<[i64; 3]> = grid
            .occupied()
            .map(|v| {
                [
                    base[0] + v[0] as i64,
                    base[1] + v[1] as i64,
                    base[2] + v[2] as i64,
                ]
            })
            .collect();
        let bottom = voxels.iter().map(|v| v[2]).min().unwrap_or(0);
        let ext = asset.shape.extent();
        let sag = ext.x.max(ext.y) * o.tilt.norm().min(std::f64::consts::FRAC_PI_2).sin();
        let band = ((sag / res) - 1e-9).ceil().max(0.0) as i64;
        Ok(Body {
            voxels,
            bottom,
            band,
            mass: o.mass,
            friction: o.friction,
            com: o.world_com(asset),
        })
    }
}

impl SimulationBackend for QuasiStatic {
    fn settle(
        &self,
        scene: &SceneState,
        catalog: &Catalog,
        _steps: usize,
    ) -> Result<SettleResult, PhysicsError> {
        let res = self.resolution;
        let lattice = self.lattice(scene)?;
        let b = scene.bounds;
        let cells = |len: f64| ((len / res - 0.5) - 1e-9).ceil().max(0.0) as i64;
        let origin = Point2::new(b.min_x, b.min_y);
        let mut env = Env {
            table: [cells(b.depth()), cells(b.width())],
            cols: HashMap::new(),
        };

        let mut bodies = Vec::with_capacity(scene.len());
        for o in &scene.objects {
            let asset = catalog
                .get(&o.asset_id)
                .ok_or_else(|| PhysicsError::UnknownAsset(o.id.clone()))?;
            bodies.push(self.body(&lattice, o, asset)?);
        }
        let n = bodies.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&i| (bodies[i].bottom, i));

        // Drop phase: vertical shift in layers (negative = down), or None when nothing is below.
        let mut shift: Vec<Option<i64>> = vec![Some(0); n];
        let mut contacts: Vec<Vec<Contact>> = vec![Vec::new(); n];
        for &bi in &order {
            let body = &mut bodies[bi];
            if body.voxels.is_empty() {
                continue;
            }
            let collides = |s: i64, env: &Env| {
                body.voxels
                    .iter()
                    .any(|v| env.owner_at(v[0], v[1], v[2] + s).is_some())
            };
            let s = if collides(0, &env) {
                let mut s = 1;
                while collides(s, &env) {
                    s += 1;
                }
                Some(s)
            } else {
                body.voxels
                    .iter()
                    .filter_map(|v| env.below(v[0], v[1], v[2]).map(|k| v[2] - k - 1))
                    .min()
                    .map(|gap| -gap)
            };
            shift[bi] = s;
            let Some(s) = s else { continue };
            for v in body.voxels.iter_mut() {
                v[2] += s;
            }
            body.bottom += s;
            let mut lowest: BTreeMap<(i64, i64), i64> = BTreeMap::new();
            for v in &body.voxels {
                lowest
                    .entry((v[0], v[1]))
                    .and_modify(|k| *k = (*k).min(v[2]))
                    .or_insert(v[2]);
            }
            for (&(i, j), &k0) in &lowest {
                for g in 0..=body.band {
                    if let Some(owner) = env.owner_at(i, j, k0 - 1 - g) {
                        contacts[bi].push(Contact {
                            i,
                            j,
                            k: k0 - 1 - g,
                            owner,
                        });
                        break;
                    }
                }
            }
            for v in &body.voxels {
                env.insert(*v, bi as u32);
            }
        }

        // Bodies that cannot stand even unloaded tip off without loading
        // their supporters.
        let unsupported: Vec<bool> = (0..n)
            .map(|bi| {
                let body = &bodies[bi];
                let pts: Vec<Point2> = contacts[bi]
                    .iter()
                    .map(|c| self.cell_xy(origin, c.i, c.j))
                    .collect();
                !body.voxels.is_empty()
                    && (shift[bi].is_none()
                        || pts.is_empty()
                        || !point_in_hull(&pts, &Point2::new(body.com.x, body.com.y), 1e-9)
                        || self.slides(body, &contacts[bi]))
            })
            .collect();
        let loads = self.loads(origin, &order, &bodies, &contacts, &unsupported);

        // Statics phase, bottom-up.
        let mut fell = vec![false; n];
        let mut standing = vec![false; n];
        for &bi in &order {
            let body = &bodies[bi];
            if body.voxels.is_empty() {
                standing[bi] = true;
                continue;
            }
            let falls = shift[bi].is_none()
                || contacts[bi].is_empty()
                || contacts[bi]
                    .iter()
                    .any(|c| c.owner != ROOT_OWNER && fell[c.owner as usize])
                || !self.balanced(
                    origin,
                    bi,
                    &bodies,
                    &contacts[bi],
                    loads[bi],
                    &env,
                    &standing,
                )
                || self.slides(body, &contacts[bi]);
            fell[bi] = falls;
            standing[bi] = !falls;
        }

        let mut result = SettleResult::default();
        let mut edges = BTreeSet::new();
        for (bi, o) in scene.objects.iter().enumerate() {
            if fell[bi] {
                result.objects.push(BodyResult {
                    id: o.id.clone(),
                    displacement: MAX_DISPLACEMENT,
                    fell: true,
                    pose: None,
                });
                continue;
            }
            let s = shift[bi].unwrap_or(0);
            let mut pose = o.pose;
            pose.position.z += s as f64 * res;
            let displacement = (s.unsigned_abs() as f64 * res).min(MAX_DISPLACEMENT);
            result.objects.push(BodyResult {
                id: o.id.clone(),
                displacement,
                fell: false,
                pose: Some(pose),
            });
            for c in &contacts[bi] {
                let supporter = if c.owner == ROOT_OWNER {
                    ROOT.to_string()
                } else {
                    scene.objects[c.owner as usize].id.clone()
                };
                edges.insert(SupportEdge {
                    supporter,
                    supported: o.id.clone(),
                });
            }
        }
        result.support = edges.into_iter().collect();
        Ok(result)
    }
}

impl QuasiStatic {
    fn cell_xy(&self, lattice_origin: Point2, i: i64, j: i64) -> Point2 {
        Point2::new(
            lattice_origin.x + (i as f64 + 0.5) * self.resolution,
            lattice_origin.y + (j as f64 + 0.5) * self.resolution,
        )
    }

    /// Total mass and load point of the body together with everything it
    /// carries, per body. A body resting on several supporters passes each a
    /// share proportional to its contact cells there, applied at the point of
    /// that contact patch nearest to its own load point. Bodies marked `inert`
    /// pass nothing on.
    fn loads(
        &self,
        origin: Point2,
        order: &[usize],
        bodies: &[Body],
        contacts: &[Vec<Contact>],
        inert: &[bool],
    ) -> Vec<(f64, Point2)> {
        let n = bodies.len();
        let mut acc: Vec<(f64, f64, f64)> = bodies
            .iter()
            .map(|b| (b.mass, b.mass * b.com.x, b.mass * b.com.y))
            .collect();
        let mut out = vec![(0.0, Point2::origin()); n];
        // Supporters come before the bodies they carry in drop order.
        for &bi in order.iter().rev() {
            let (m, mx, my) = acc[bi];
            let point = Point2::new(mx / m, my / m);
            out[bi] = (m, point);
            if inert[bi] {
                continue;
            }
            let mut patches: BTreeMap<usize, Vec<Point2>> = BTreeMap::new();
            for c in contacts[bi]
                .iter()
                .filter(|c| c.owner != ROOT_OWNER && c.owner as usize != bi)
            {
                patches
                    .entry(c.owner as usize)
                    .or_default()
                    .push(self.cell_xy(origin, c.i, c.j));
            }
            let total = contacts[bi].len() as f64;
            for (owner, patch) in patches {
                let share = m * patch.len() as f64 / total;
                let at = nearest_in_hull(&patch, &point);
                let a = &mut acc[owner];
                a.0 += share;
                a.1 += share * at.x;
                a.2 += share * at.y;
            }
        }
        out
    }

    /// The load point of the body and everything it carries lies in the hull
    /// of its contact cells and of the faces it leans on.
    #[allow(clippy::too_many_arguments)]
    fn balanced(
        &self,
        origin: Point2,
        bi: usize,
        bodies: &[Body],
        contacts: &[Contact],
        load: (f64, Point2),
        env: &Env,
        standing: &[bool],
    ) -> bool {
        let res = self.resolution;
        let body = &bodies[bi];
        let mut pts: Vec<Point2> = contacts
            .iter()
            .map(|c| self.cell_xy(origin, c.i, c.j))
            .collect();
        for v in body.voxels.iter().filter(|v| v[2] > body.bottom) {
            for (di, dj) in [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)] {
                let Some(owner) = env.owner_at(v[0] + di, v[1] + dj, v[2]) else {
                    continue;
                };
                if owner != ROOT_OWNER && owner as usize != bi && standing[owner as usize] {
                    let c = self.cell_xy(origin, v[0], v[1]);
                    pts.push(Point2::new(
                        c.x + 0.5 * res * di as f64,
                        c.y + 0.5 * res * dj as f64,
                    ));
                }
            }
        }
        point_in_hull(&pts, &load.1, 1e-9)
    }

    /// Least-squares plane through the support heights under the contact
    /// cells; the body slides if the plane is steeper than its friction.
    fn slides(&self, body: &Body, contacts: &[Contact]) -> bool {
        if contacts.len() < 2 {
            return false;
        }
        let mut ata = Matrix3::<f64>::zeros();
        let mut atb = NVector3::<f64>::zeros();
        for c in contacts {
            let row = NVector3::new(1.0, c.i as f64, c.j as f64);
            ata += row * row.transpose();
            atb += row * c.k as f64;
        }
        let Ok(pinv) = ata.pseudo_inverse(1e-9) else {
            return false;
        };
        let sol = pinv * atb;
        let tan = (sol[1] * sol[1] + sol[2] * sol[2]).sqrt();
        tan > body.friction + 1e-12
    }
}

/// Closest point to `p` in the convex hull of `pts`.
fn nearest_in_hull(pts: &[Point2], p: &Point2) -> Point2 {
    if point_in_hull(pts, p, 1e-12) {
        return *p;
    }
    let hull = hull_points(pts);
    let nearest = |a: &Point2, b: &Point2| -> Point2 {
        let ab = b - a;
        let len2 = ab.norm_squared();
        if len2 == 0.0 {
            return *a;
        }
        a + ab * ((p - a).dot(&ab) / len2).clamp(0.0, 1.0)
    };
    match hull.len() {
        0 => *p,
        1 => hull[0],
        k => (0..k)
            .map(|i| nearest(&hull[i], &hull[(i + 1) % k]))
            .min_by(|a, b| (a - p).norm_squared().total_cmp(&(b - p).norm_squared()))
            .expect("hull is not empty"),
    }
}
