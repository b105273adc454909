use crate::catalog::{AssetRecord, Catalog};
use crate::geometry::{
    contact_cells, voxelize_on, GeometryError, Lattice, OccupancyGrid, Point2, Point3, Vector3,
};
use crate::scene::SceneState;
use crate::shape::RigidTransform;
use crate::spatial::Pose;

/// Owner code of empty scene voxels.
pub const OWNER_NONE: u32 = 0;
/// Owner code of the surface slab.
pub const OWNER_ROOT: u32 = 1;

/// Scene voxelized on the placement lattice.
///
/// Layer 0 is the surface slab, so a voxel in layer `k` spans
/// `[top_z + (k − 1)·res, top_z + k·res)`. The x–y extent covers the cells
/// whose centres lie on the surface.
#[derive(Debug, Clone)]
pub struct SceneGrid {
    pub grid: OccupancyGrid,
    owners: Vec<u32>,
    /// Scene object ids; object `n` has owner code `n + 2`.
    pub ids: Vec<String>,
}

impl SceneGrid {
    /// `headroom` is free space kept above the highest object, in meters.
    pub fn build(
        scene: &SceneState,
        catalog: &Catalog,
        resolution: f64,
        headroom: f64,
    ) -> Result<Self, GeometryError> {
        let b = scene.bounds;
        let lattice = Lattice::new(
            Point3::new(b.min_x, b.min_y, b.top_z - resolution),
            resolution,
        )?;
        let cells = |len: f64| ((len / resolution - 0.5) - 1e-9).ceil().max(1.0) as usize;
        let (nx, ny) = (cells(b.depth()), cells(b.width()));

        let mut voxelized = Vec::with_capacity(scene.len());
        let mut top = 0usize;
        for o in &scene.objects {
            let asset = catalog
                .get(&o.asset_id)
                .expect("scene assets come from the catalog");
            let g = voxelize_on(&asset.shape, &o.transform(asset), &lattice, &o.id)?;
            let g0 = g.origin();
            let base = [0, 1, 2].map(|a| ((g0[a] - lattice.origin[a]) / resolution).round() as i64);
            let cells: Vec<[i64; 3]> = g
                .occupied()
                .map(|v| {
                    [
                        base[0] + v[0] as i64,
                        base[1] + v[1] as i64,
                        base[2] + v[2] as i64,
                    ]
                })
                .collect();
            top = top.max(
                cells
                    .iter()
                    .map(|v| v[2].max(0) as usize)
                    .max()
                    .unwrap_or(0),
            );
            voxelized.push(cells);
        }
        let nz = top + 2 + (headroom / resolution - 1e-9).ceil().max(0.0) as usize;
        let mut grid = OccupancyGrid::new(lattice.origin, resolution, [nx, ny, nz]);
        let mut owners = vec![OWNER_NONE; nx * ny * nz];
        for i in 0..nx {
            for j in 0..ny {
                grid.set(i, j, 0, true);
                owners[(i * ny + j) * nz] = OWNER_ROOT;
            }
        }
        for (n, cells) in voxelized.iter().enumerate() {
            for v in cells {
                if v.iter().any(|&c| c < 0)
                    || v[0] as usize >= nx
                    || v[1] as usize >= ny
                    || v[2] as usize >= nz
                {
                    continue;
                }
                let (i, j, k) = (v[0] as usize, v[1] as usize, v[2] as usize);
                grid.set(i, j, k, true);
                owners[(i * ny + j) * nz + k] = n as u32 + 2;
            }
        }
        Ok(Self {
            grid,
            owners,
            ids: scene.objects.iter().map(|o| o.id.clone()).collect(),
        })
    }

    pub fn owner(&self, v: [usize; 3]) -> u32 {
        let [_, ny, nz] = self.grid.dims();
        self.owners[(v[0] * ny + v[1]) * nz + v[2]]
    }

    /// Owner code of a scene object.
    pub fn owner_of(&self, id: &str) -> Option<u32> {
        self.ids.iter().position(|x| x == id).map(|n| n as u32 + 2)
    }

    pub fn owner_id(&self, code: u32) -> Option<&str> {
        match code {
            OWNER_NONE | OWNER_ROOT => None,
            c => self.ids.get(c as usize - 2).map(String::as_str),
        }
    }

    /// World corner of voxel `v`.
    pub fn corner(&self, v: [usize; 3]) -> Point3 {
        let o = self.grid.origin();
        let r = self.grid.resolution();
        Point3::new(
            o.x + v[0] as f64 * r,
            o.y + v[1] as f64 * r,
            o.z + v[2] as f64 * r,
        )
    }
}

/// An object voxelized upright at a fixed yaw, with its bounding box snapped
/// to lattice planes.
#[derive(Debug, Clone)]
pub struct ObjectGrid {
    /// Cropped to the occupied voxels.
    pub grid: OccupancyGrid,
    pub yaw: f64,
    /// Pose position of the object when the grid's lower corner is at the world origin.
    frame_offset: Vector3,
    /// Nominal centre of mass relative to the grid's lower corner.
    com: Vector3,
}

impl ObjectGrid {
    pub fn new(
        asset: &AssetRecord,
        yaw: f64,
        resolution: f64,
    ) -> Result<Option<Self>, GeometryError> {
        let lattice = Lattice::new(Point3::origin(), resolution)?;
        let upright =
            RigidTransform::from_pose(&Pose::new(0.0, 0.0, 0.0, yaw), asset.front_yaw, None);
        let (lo, _) = upright.world_aabb(&asset.shape);
        let xf = RigidTransform {
            rotation: upright.rotation,
            translation: -lo.coords,
        };
        let full = voxelize_on(&asset.shape, &xf, &lattice, &asset.id)?;
        let Some((grid, crop)) = full.cropped() else {
            return Ok(None);
        };
        let corner = full.origin().coords
            + Vector3::new(crop[0] as f64, crop[1] as f64, crop[2] as f64) * resolution;
        let com = xf
            .apply(&(asset.shape.local_centroid() + asset.nominal_com_shift()))
            .coords
            - corner;
        Ok(Some(Self {
            grid,
            yaw: crate::spatial::normalize_angle(yaw),
            frame_offset: -lo.coords - corner,
            com,
        }))
    }

    /// Pose that puts the grid's lower corner at `corner`.
    pub fn pose_at(&self, corner: Point3) -> Pose {
        let p = corner + self.frame_offset;
        Pose {
            position: p,
            yaw: self.yaw,
        }
    }

    /// Nominal centre of mass when the grid's lower corner is at `corner`.
    pub fn com_at(&self, corner: Point3) -> Point3 {
        corner + self.com
    }
}

/// A feasible offset with its contact cells resolved against the scene.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactInfo {
    pub offset: [usize; 3],
    /// Contact cell centres, world x–y.
    pub contact: Vec<Point2>,
    /// Owner code of the scene voxel under each contact cell.
    pub owners: Vec<u32>,
    pub bottom_cells: usize,
    pub com: Point3,
}

impl ContactInfo {
    pub fn support_ratio(&self) -> f64 {
        self.contact.len() as f64 / self.bottom_cells as f64
    }
}

/// Contacts of `object` at every feasible offset that has at least one.
pub fn contacts_at_offsets(
    scene: &SceneGrid,
    object: &ObjectGrid,
    offsets: impl IntoIterator<Item = [usize; 3]>,
    k_bottom: usize,
    k_search: usize,
) -> Vec<ContactInfo> {
    let bottom_cells = crate::geometry::bottom_surface(&object.grid, k_bottom).count();
    let res = scene.grid.resolution();
    offsets
        .into_iter()
        .filter_map(|t| {
            let cells = contact_cells(&object.grid, t, &scene.grid, k_bottom, k_search);
            if cells.is_empty() {
                return None;
            }
            let corner = scene.corner(t);
            let contact = cells
                .iter()
                .map(|c| {
                    Point2::new(
                        corner.x + (c.i as f64 + 0.5) * res,
                        corner.y + (c.j as f64 + 0.5) * res,
                    )
                })
                .collect();
            let owners = cells.iter().map(|c| scene.owner(c.scene)).collect();
            Some(ContactInfo {
                offset: t,
                contact,
                owners,
                bottom_cells,
                com: object.com_at(corner),
            })
        })
        .collect()
}
