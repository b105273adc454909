use std::f64::consts::TAU;

use rand::seq::SliceRandom;
use rand::Rng;

use super::grid::{contacts_at_offsets, ContactInfo, ObjectGrid, SceneGrid, OWNER_ROOT};
use super::{
    GridParams, PhysicalError, PlacementCandidate, PlacementOutcome, PlacementRequest,
    StabilityTarget,
};
use crate::catalog::{AssetRecord, Catalog};
use crate::geometry::{
    feasible_offsets, hull_points, point_in_hull, segment_distance, Point2, Point3,
};
use crate::physics::{SimulationBackend, DEFAULT_SETTLE_STEPS};
use crate::rng::stream;
use crate::scene::{PlacedObject, SceneState};
use crate::spatial::Pose;

/// Weight of the stable/unstable edge-distance bias relative to the offset
/// and overlap terms.
const STABILITY_WEIGHT: f64 = 0.25;

fn edge_distance(contact: &[Point2], com: &Point2) -> f64 {
    let hull = hull_points(contact);
    if hull.len() < 3 {
        return 0.0;
    }
    (0..hull.len())
        .map(|i| segment_distance(com, &hull[i], &hull[(i + 1) % hull.len()]))
        .fold(f64::INFINITY, f64::min)
}

fn supported(c: &ContactInfo) -> bool {
    point_in_hull(&c.contact, &Point2::new(c.com.x, c.com.y), 1e-9)
}

fn object_grid(req: &PlacementRequest<'_>, res: f64) -> Result<ObjectGrid, PhysicalError> {
    ObjectGrid::new(req.asset, req.yaw, res)?.ok_or_else(|| PhysicalError::NoFeasiblePlacement {
        object: req.id.clone(),
        target: req.target.clone(),
        feasible_offsets: 0,
    })
}

fn candidate(
    scene: &SceneGrid,
    obj: &ObjectGrid,
    c: &ContactInfo,
    score: f64,
) -> PlacementCandidate {
    PlacementCandidate {
        offset: c.offset,
        pose: obj.pose_at(scene.corner(c.offset)),
        support_ratio: c.support_ratio(),
        edge_distance: edge_distance(&c.contact, &Point2::new(c.com.x, c.com.y)),
        score,
    }
}

/// Ranked PLACE-ON candidates: collision-free offsets whose contact cells all
/// lie on the target and whose nominal centre of mass is supported, in
/// descending score (ties in seeded random order).
pub fn place_on_candidates(
    scene: &SceneState,
    catalog: &Catalog,
    req: &PlacementRequest<'_>,
    grid: &GridParams,
    seed: u64,
) -> Result<(Vec<PlacementCandidate>, usize), PhysicalError> {
    let target = scene
        .get(&req.target)
        .ok_or_else(|| PhysicalError::UnknownTarget(req.target.clone()))?;
    let target_asset = catalog
        .get(&target.asset_id)
        .ok_or_else(|| PhysicalError::UnknownTarget(req.target.clone()))?;
    if target_asset.supporting_probability <= 0.0 {
        return Err(PhysicalError::TargetNotSupporting(req.target.clone()));
    }
    let obj = object_grid(req, grid.resolution)?;
    let height = obj.grid.dims()[2] as f64 * grid.resolution;
    let sg = SceneGrid::build(scene, catalog, grid.resolution, height)?;
    let code = sg.owner_of(&req.target).expect("target is in the scene");
    let feasible = feasible_offsets(&sg.grid, &obj.grid);
    let contacts = contacts_at_offsets(&sg, &obj, feasible.iter(), grid.k_bottom, grid.k_search);

    let (tlo, thi) = target.footprint(target_asset).aabb();
    let (ex, ey) = (thi.x - tlo.x, thi.y - tlo.y);
    let t = target.pose.position;
    let [ox, oy, _] = obj.grid.dims();
    let half = 0.5 * ox.min(oy) as f64 * grid.resolution;
    let p = req.params;

    let mut out: Vec<PlacementCandidate> = contacts
        .iter()
        .filter(|c| c.owners.iter().all(|&o| o == code) && supported(c))
        .map(|c| {
            let mut cand = candidate(&sg, &obj, c, 0.0);
            let mut s = 0.0;
            if p.x_offset.is_some() || p.y_offset.is_some() {
                let dx = (cand.pose.position.x - t.x - p.x_offset.unwrap_or(0.0)) / ex;
                let dy = (cand.pose.position.y - t.y - p.y_offset.unwrap_or(0.0)) / ey;
                s -= (dx * dx + dy * dy).sqrt();
            }
            if let Some(o) = p.overlap {
                s -= (cand.support_ratio - o).abs();
            }
            match p.stability {
                Some(StabilityTarget::Stable) => s += STABILITY_WEIGHT * cand.edge_distance / half,
                Some(StabilityTarget::Unstable) => {
                    s -= STABILITY_WEIGHT * cand.edge_distance / half
                }
                None => {}
            }
            cand.score = s;
            cand
        })
        .collect();
    out.shuffle(&mut stream(seed, &format!("place-on:{}", req.id)));
    out.sort_by(|a, b| b.score.total_cmp(&a.score));
    Ok((out, feasible.len()))
}

/// PLACE-ANYWHERE candidates: collision-free offsets resting on the surface
/// or on objects that can support others, scored by the mean supporting
/// probability under the contact cells. The top decile comes first in
/// seeded random order, the rest follow by score.
pub fn anywhere_candidates(
    scene: &SceneState,
    catalog: &Catalog,
    req: &PlacementRequest<'_>,
    grid: &GridParams,
    seed: u64,
) -> Result<(Vec<PlacementCandidate>, usize), PhysicalError> {
    let obj = object_grid(req, grid.resolution)?;
    let height = obj.grid.dims()[2] as f64 * grid.resolution;
    let sg = SceneGrid::build(scene, catalog, grid.resolution, height)?;
    let prob = |code: u32| -> f64 {
        if code == OWNER_ROOT {
            return 1.0;
        }
        sg.owner_id(code)
            .and_then(|id| scene.get(id))
            .and_then(|o| catalog.get(&o.asset_id))
            .map_or(0.0, |a| a.supporting_probability)
    };
    let feasible = feasible_offsets(&sg.grid, &obj.grid);
    let contacts = contacts_at_offsets(&sg, &obj, feasible.iter(), grid.k_bottom, grid.k_search);
    let mut out: Vec<PlacementCandidate> = contacts
        .iter()
        .filter(|c| c.owners.iter().all(|&o| prob(o) > 0.0) && supported(c))
        .map(|c| {
            let score = c.owners.iter().map(|&o| prob(o)).sum::<f64>() / c.owners.len() as f64;
            candidate(&sg, &obj, c, score)
        })
        .collect();
    let mut rng = stream(seed, &format!("place-anywhere:{}", req.id));
    out.shuffle(&mut rng);
    out.sort_by(|a, b| b.score.total_cmp(&a.score));
    let top = out.len().div_ceil(10);
    out[..top].shuffle(&mut rng);
    Ok((out, feasible.len()))
}

/// Runs ranked candidates through the backend and keeps the first that
/// stays put.
fn validate(
    scene: &SceneState,
    catalog: &Catalog,
    req: &PlacementRequest<'_>,
    candidates: Vec<PlacementCandidate>,
    feasible: usize,
    grid: &GridParams,
    backend: &dyn SimulationBackend,
) -> Result<PlacementOutcome, PhysicalError> {
    if candidates.is_empty() {
        return Err(PhysicalError::NoFeasiblePlacement {
            object: req.id.clone(),
            target: req.target.clone(),
            feasible_offsets: feasible,
        });
    }
    let total = candidates.len();
    let mut tried = 0;
    for cand in candidates.into_iter().take(grid.max_physics_tries) {
        tried += 1;
        let mut trial = scene.clone();
        trial
            .objects
            .push(PlacedObject::nominal(&req.id, req.asset, cand.pose));
        let r = backend.settle(&trial, catalog, DEFAULT_SETTLE_STEPS)?;
        if !r.any_fell() && r.max_displacement() <= grid.tolerance() + 1e-9 {
            let pose = r.get(&req.id).and_then(|b| b.pose).unwrap_or(cand.pose);
            return Ok(PlacementOutcome {
                pose,
                candidate: cand,
                candidates: total,
                tried,
            });
        }
    }
    Err(PhysicalError::PhysicsRejection {
        object: req.id.clone(),
        target: req.target.clone(),
        tried,
        candidates: total,
    })
}

/// Places `req.asset` on `req.target`.
pub fn place_on(
    scene: &SceneState,
    catalog: &Catalog,
    req: &PlacementRequest<'_>,
    grid: &GridParams,
    backend: &dyn SimulationBackend,
    seed: u64,
) -> Result<PlacementOutcome, PhysicalError> {
    let (cands, feasible) = place_on_candidates(scene, catalog, req, grid, seed)?;
    validate(scene, catalog, req, cands, feasible, grid, backend)
}

/// Places `req.asset` at a random supported spot.
pub fn place_anywhere(
    scene: &SceneState,
    catalog: &Catalog,
    req: &PlacementRequest<'_>,
    grid: &GridParams,
    backend: &dyn SimulationBackend,
    seed: u64,
) -> Result<PlacementOutcome, PhysicalError> {
    let (cands, feasible) = anywhere_candidates(scene, catalog, req, grid, seed)?;
    validate(scene, catalog, req, cands, feasible, grid, backend)
}

/// Open columns of a container: cells strictly inside its footprint whose top is at
/// least two voxels below the rim. Returns the cells (scene-grid x–y) and the
/// world height of the rim top.
pub fn cavity_columns(
    scene: &SceneState,
    catalog: &Catalog,
    container: &str,
    resolution: f64,
) -> Result<(Vec<[usize; 2]>, f64), PhysicalError> {
    let obj = scene
        .get(container)
        .ok_or_else(|| PhysicalError::UnknownTarget(container.to_string()))?;
    let asset = catalog
        .get(&obj.asset_id)
        .ok_or_else(|| PhysicalError::UnknownTarget(container.to_string()))?;
    let sg = SceneGrid::build(scene, catalog, resolution, 0.0)?;
    let code = sg.owner_of(container).expect("container is in the scene");
    let fp = obj.footprint(asset);
    let [nx, ny, nz] = sg.grid.dims();
    let top_of = |i: usize, j: usize| (0..nz).rev().find(|&k| sg.owner([i, j, k]) == code);
    let rim = (0..nx)
        .flat_map(|i| (0..ny).map(move |j| (i, j)))
        .filter_map(|(i, j)| top_of(i, j))
        .max();
    let Some(rim) = rim else {
        return Err(PhysicalError::ContainerHasNoCavity(container.to_string()));
    };
    let mut cells = Vec::new();
    for i in 0..nx {
        for j in 0..ny {
            let c = sg.corner([i, j, 0]);
            let centre = Point2::new(c.x + 0.5 * resolution, c.y + 0.5 * resolution);
            let v = fp.vertices();
            let on_edge = (0..v.len())
                .any(|n| segment_distance(&centre, &v[n], &v[(n + 1) % v.len()]) <= 1e-9);
            if !fp.contains(&centre) || on_edge {
                continue;
            }
            if top_of(i, j).is_none_or(|k| k + 2 <= rim) {
                cells.push([i, j]);
            }
        }
    }
    if cells.is_empty() {
        return Err(PhysicalError::ContainerHasNoCavity(container.to_string()));
    }
    Ok((cells, sg.corner([0, 0, rim + 1]).z))
}

/// Drops a batch of retrieved objects into `container` one at a time and
/// adds those that come to rest inside it to `scene`. Items are named
/// `{category}_{n}` with the smallest free `n`. Returns the placed ids with
/// their poses.
pub fn place_in(
    scene: &mut SceneState,
    catalog: &Catalog,
    container: &str,
    batch: &[(String, u64)],
    grid: &GridParams,
    backend: &dyn SimulationBackend,
    seed: u64,
) -> Result<Vec<(String, Pose)>, PhysicalError> {
    let mut items: Vec<(String, &AssetRecord)> = Vec::new();
    for (category, count) in batch {
        let asset = catalog
            .retrieve(category, catalog.retrieval_threshold)
            .map_err(|_| PhysicalError::Retrieval(category.clone()))?;
        for _ in 0..*count {
            let id = (0..)
                .map(|n| format!("{category}_{n}"))
                .find(|id| !scene.contains(id) && !items.iter().any(|(i, _)| i == id))
                .expect("unbounded range");
            items.push((id, asset));
        }
    }
    place_items_in(scene, catalog, container, &items, grid, backend, seed)
}

/// Drops the given objects into `container` in order; see [`place_in`].
pub fn place_items_in(
    scene: &mut SceneState,
    catalog: &Catalog,
    container: &str,
    items: &[(String, &AssetRecord)],
    grid: &GridParams,
    backend: &dyn SimulationBackend,
    seed: u64,
) -> Result<Vec<(String, Pose)>, PhysicalError> {
    let res = grid.resolution;
    let (cells, rim_z) = cavity_columns(scene, catalog, container, res)?;
    let cont = scene.get(container).expect("checked by cavity_columns");
    let cont_asset = catalog
        .get(&cont.asset_id)
        .expect("checked by cavity_columns");
    let (blo, bhi) = cont.transform(cont_asset).world_aabb(&cont_asset.shape);
    let mut rng = stream(seed, &format!("place-in:{container}"));
    let mut placed = Vec::new();
    let mut failed = Vec::new();
    let b = scene.bounds;

    for (id, asset) in items {
        let (id, asset) = (id.clone(), *asset);
        {
            let mut done = false;
            for _ in 0..grid.drop_retries {
                let [i, j] = cells[rng.random_range(0..cells.len())];
                let yaw = rng.random::<f64>() * TAU;
                // Release one voxel above everything already in the scene.
                let top = scene
                    .with_assets(catalog)
                    .map(|(o, a)| o.transform(a).world_aabb(&a.shape).1.z)
                    .fold(b.top_z, f64::max);
                let release = b.top_z + ((top - b.top_z) / res - 1e-9).ceil().max(0.0) * res + res;
                let x = b.min_x + (i as f64 + 0.5) * res;
                let y = b.min_y + (j as f64 + 0.5) * res;
                let item = PlacedObject::nominal(&id, asset, Pose::new(x, y, release, yaw));
                let mut trial = scene.clone();
                trial.objects.push(item.clone());
                let r = backend.settle(&trial, catalog, DEFAULT_SETTLE_STEPS)?;
                let others_still = r
                    .objects
                    .iter()
                    .filter(|o| o.id != id)
                    .all(|o| !o.fell && o.displacement <= grid.tolerance() + 1e-9);
                let Some(pose) = r.get(&id).filter(|o| !o.fell).and_then(|o| o.pose) else {
                    continue;
                };
                let mut settled = item;
                settled.pose = pose;
                let (lo, hi) = settled.transform(asset).world_aabb(&asset.shape);
                let inside = lo.x >= blo.x - 1e-9
                    && lo.y >= blo.y - 1e-9
                    && hi.x <= bhi.x + 1e-9
                    && hi.y <= bhi.y + 1e-9;
                let com: Point3 = settled.world_com(asset);
                if others_still && inside && com.z < rim_z {
                    scene.objects.push(settled);
                    placed.push((id.clone(), pose));
                    done = true;
                    break;
                }
            }
            if !done {
                failed.push(id);
            }
        }
    }
    if failed.is_empty() {
        Ok(placed)
    } else {
        Err(PhysicalError::BatchPartiallyPlaced {
            container: container.to_string(),
            placed: placed.into_iter().map(|(id, _)| id).collect(),
            failed,
        })
    }
}
