use super::{GeometryError, Point3};
use crate::catalog::AssetRecord;
use crate::shape::{RigidTransform, Shape};
use crate::spatial::Pose;

/// Containment margin: a voxel centre must lie this far inside the solid.
/// Centres that coincide with a face are treated as outside, so solids that
/// merely touch never share a voxel.
const INSIDE_EPS: f64 = 1e-9;

/// Regular cubic lattice. Voxel `(i, j, k)` spans
/// `[origin + res·(i,j,k), origin + res·(i+1,j+1,k+1))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lattice {
    pub origin: Point3,
    pub resolution: f64,
}

impl Lattice {
    pub fn new(origin: Point3, resolution: f64) -> Result<Self, GeometryError> {
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(GeometryError::BadResolution(resolution));
        }
        Ok(Self { origin, resolution })
    }

    /// Lattice index of the cell containing `v` along one axis.
    pub fn cell(&self, axis: usize, v: f64) -> i64 {
        ((v - self.origin[axis]) / self.resolution).floor() as i64
    }

    pub fn point(&self, idx: [i64; 3]) -> Point3 {
        Point3::new(
            self.origin.x + idx[0] as f64 * self.resolution,
            self.origin.y + idx[1] as f64 * self.resolution,
            self.origin.z + idx[2] as f64 * self.resolution,
        )
    }
}

/// Axis-aligned boolean voxel volume, bit-packed along z.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    origin: Point3,
    resolution: f64,
    dims: [usize; 3],
    words: usize,
    bits: Vec<u64>,
}

impl OccupancyGrid {
    pub fn new(origin: Point3, resolution: f64, dims: [usize; 3]) -> Self {
        assert!(resolution > 0.0, "resolution must be positive");
        assert!(dims.iter().all(|&d| d >= 1), "grid dims must be >= 1");
        let words = dims[2].div_ceil(64);
        Self {
            origin,
            resolution,
            dims,
            words,
            bits: vec![0; dims[0] * dims[1] * words],
        }
    }

    pub fn from_fn(
        origin: Point3,
        resolution: f64,
        dims: [usize; 3],
        mut f: impl FnMut(usize, usize, usize) -> bool,
    ) -> Self {
        let mut g = Self::new(origin, resolution, dims);
        for i in 0..dims[0] {
            for j in 0..dims[1] {
                for k in 0..dims[2] {
                    if f(i, j, k) {
                        g.set(i, j, k, true);
                    }
                }
            }
        }
        g
    }

    pub fn origin(&self) -> Point3 {
        self.origin
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    /// Number of u64 words per z column.
    pub fn words(&self) -> usize {
        self.words
    }

    fn col_index(&self, i: usize, j: usize) -> usize {
        (i * self.dims[1] + j) * self.words
    }

    pub fn column(&self, i: usize, j: usize) -> &[u64] {
        let c = self.col_index(i, j);
        &self.bits[c..c + self.words]
    }

    pub fn column_mut(&mut self, i: usize, j: usize) -> &mut [u64] {
        let c = self.col_index(i, j);
        &mut self.bits[c..c + self.words]
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> bool {
        if i >= self.dims[0] || j >= self.dims[1] || k >= self.dims[2] {
            return false;
        }
        self.column(i, j)[k / 64] >> (k % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, v: bool) {
        assert!(
            i < self.dims[0] && j < self.dims[1] && k < self.dims[2],
            "voxel index out of range"
        );
        let col = self.column_mut(i, j);
        if v {
            col[k / 64] |= 1 << (k % 64);
        } else {
            col[k / 64] &= !(1 << (k % 64));
        }
    }

    pub fn count(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.iter().all(|&w| w == 0)
    }

    pub fn voxel_center(&self, i: usize, j: usize, k: usize) -> Point3 {
        let h = 0.5 * self.resolution;
        Point3::new(
            self.origin.x + i as f64 * self.resolution + h,
            self.origin.y + j as f64 * self.resolution + h,
            self.origin.z + k as f64 * self.resolution + h,
        )
    }

    /// Lowest occupied layer of column `(i, j)`.
    pub fn column_lowest(&self, i: usize, j: usize) -> Option<usize> {
        self.column(i, j)
            .iter()
            .enumerate()
            .find(|(_, w)| **w != 0)
            .map(|(n, w)| n * 64 + w.trailing_zeros() as usize)
    }

    /// Highest occupied layer of column `(i, j)`.
    pub fn column_highest(&self, i: usize, j: usize) -> Option<usize> {
        self.column(i, j)
            .iter()
            .enumerate()
            .rev()
            .find(|(_, w)| **w != 0)
            .map(|(n, w)| n * 64 + 63 - w.leading_zeros() as usize)
    }

    pub fn occupied(&self) -> impl Iterator<Item = [usize; 3]> + '_ {
        let [nx, ny, nz] = self.dims;
        (0..nx).flat_map(move |i| {
            (0..ny).flat_map(move |j| {
                (0..nz)
                    .filter(move |&k| self.get(i, j, k))
                    .map(move |k| [i, j, k])
            })
        })
    }

    /// Occupied index bounds as `(min, max)` inclusive, or `None` if empty.
    pub fn occupied_bounds(&self) -> Option<([usize; 3], [usize; 3])> {
        let mut min = [usize::MAX; 3];
        let mut max = [0usize; 3];
        let mut any = false;
        for i in 0..self.dims[0] {
            for j in 0..self.dims[1] {
                if let (Some(lo), Some(hi)) = (self.column_lowest(i, j), self.column_highest(i, j))
                {
                    any = true;
                    min = [min[0].min(i), min[1].min(j), min[2].min(lo)];
                    max = [max[0].max(i), max[1].max(j), max[2].max(hi)];
                }
            }
        }
        any.then_some((min, max))
    }

    /// Copy cropped to the occupied bounding box, with the index of the new
    /// origin voxel in this grid.
    pub fn cropped(&self) -> Option<(OccupancyGrid, [usize; 3])> {
        let (min, max) = self.occupied_bounds()?;
        let dims = [
            max[0] - min[0] + 1,
            max[1] - min[1] + 1,
            max[2] - min[2] + 1,
        ];
        let origin = Point3::new(
            self.origin.x + min[0] as f64 * self.resolution,
            self.origin.y + min[1] as f64 * self.resolution,
            self.origin.z + min[2] as f64 * self.resolution,
        );
        let g = OccupancyGrid::from_fn(origin, self.resolution, dims, |i, j, k| {
            self.get(i + min[0], j + min[1], k + min[2])
        });
        Some((g, min))
    }
}

/// Voxelizes an asset at `pose` on the lattice anchored at the world origin.
pub fn voxelize(
    asset: &AssetRecord,
    pose: &Pose,
    resolution: f64,
) -> Result<OccupancyGrid, GeometryError> {
    let lattice = Lattice::new(Point3::origin(), resolution)?;
    let xf = RigidTransform::from_pose(pose, asset.front_yaw, None);
    voxelize_on(&asset.shape, &xf, &lattice, &asset.id)
}

/// Voxel-centre containment voxelization on an arbitrary lattice. The grid
/// bounds the posed solid plus one empty voxel on every side.
pub fn voxelize_on(
    shape: &Shape,
    xf: &RigidTransform,
    lattice: &Lattice,
    name: &str,
) -> Result<OccupancyGrid, GeometryError> {
    let (lo, hi) = xf.world_aabb(shape);
    let res = lattice.resolution;
    let imin = [
        lattice.cell(0, lo.x) - 1,
        lattice.cell(1, lo.y) - 1,
        lattice.cell(2, lo.z) - 1,
    ];
    let upper =
        |axis: usize, v: f64| ((v - lattice.origin[axis]) / res - INSIDE_EPS).ceil() as i64 + 1;
    let imax = [upper(0, hi.x), upper(1, hi.y), upper(2, hi.z)];
    let dims = [
        (imax[0] - imin[0]) as usize,
        (imax[1] - imin[1]) as usize,
        (imax[2] - imin[2]) as usize,
    ];
    let mut grid = OccupancyGrid::new(lattice.point(imin), res, dims);
    match shape {
        Shape::Mesh(mesh) => {
            let tris: Vec<[Point3; 3]> = mesh
                .triangles()
                .map(|t| [xf.apply(&t[0]), xf.apply(&t[1]), xf.apply(&t[2])])
                .collect();
            let mut hit_columns = 0usize;
            let mut bad_columns = 0usize;
            let mut zs: Vec<f64> = Vec::new();
            for i in 0..dims[0] {
                for j in 0..dims[1] {
                    let c = grid.voxel_center(i, j, 0);
                    zs.clear();
                    for t in &tris {
                        if let Some(z) = ray_hit(t, c.x, c.y) {
                            zs.push(z);
                        }
                    }
                    if zs.is_empty() {
                        continue;
                    }
                    hit_columns += 1;
                    if zs.len() % 2 == 1 {
                        bad_columns += 1;
                        continue;
                    }
                    zs.sort_by(f64::total_cmp);
                    for k in 0..dims[2] {
                        let z = c.z + k as f64 * res;
                        if zs
                            .chunks(2)
                            .any(|p| z > p[0] + INSIDE_EPS && z < p[1] - INSIDE_EPS)
                        {
                            grid.set(i, j, k, true);
                        }
                    }
                }
            }
            if hit_columns > 0 && bad_columns as f64 > 0.01 * hit_columns as f64 {
                return Err(GeometryError::NonWatertight(name.to_string()));
            }
        }
        Shape::Primitive(p) => {
            let inv = xf.rotation.inverse();
            for i in 0..dims[0] {
                for j in 0..dims[1] {
                    for k in 0..dims[2] {
                        let c = grid.voxel_center(i, j, k);
                        let local = inv * (c - xf.translation).coords;
                        if p.contains(&Point3::from(local), INSIDE_EPS) {
                            grid.set(i, j, k, true);
                        }
                    }
                }
            }
        }
    }
    Ok(grid)
}

/// z of the intersection of the vertical line through `(x, y)` with a
/// triangle, with a top-left ownership rule so shared edges count once.
fn ray_hit(t: &[Point3; 3], x: f64, y: f64) -> Option<f64> {
    let (mut a, mut b, c) = (t[0], t[1], t[2]);
    let area = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
    if area == 0.0 {
        return None;
    }
    if area < 0.0 {
        std::mem::swap(&mut a, &mut b);
    }
    let edge = |p: &Point3, q: &Point3| (q.x - p.x) * (y - p.y) - (q.y - p.y) * (x - p.x);
    let owned = |p: &Point3, q: &Point3| p.y > q.y || (p.y == q.y && p.x < q.x);
    let e0 = edge(&a, &b);
    let e1 = edge(&b, &c);
    let e2 = edge(&c, &a);
    let inside = |e: f64, p: &Point3, q: &Point3| e > 0.0 || (e == 0.0 && owned(p, q));
    if !(inside(e0, &a, &b) && inside(e1, &b, &c) && inside(e2, &c, &a)) {
        return None;
    }
    let sum = e0 + e1 + e2;
    // Barycentric weights: e1 ↔ a, e2 ↔ b, e0 ↔ c.
    Some((e1 * a.z + e2 * b.z + e0 * c.z) / sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shape::{Primitive, TriMesh};

    fn cube_asset(size: f64) -> AssetRecord {
        AssetRecord::primitive("cube_0", Primitive::Box { size: [size; 3] })
    }

    #[test]
    fn cube_exact_division() {
        let g = voxelize(&cube_asset(0.1), &Pose::default(), 0.05).unwrap();
        assert_eq!(g.count(), 8);
        let (min, max) = g.occupied_bounds().unwrap();
        assert_eq!(
            [max[0] - min[0], max[1] - min[1], max[2] - min[2]],
            [1, 1, 1]
        );
        // one-voxel margin on every side
        assert_eq!(min, [1, 1, 1]);
        assert_eq!(g.dims(), [4, 4, 4]);
    }

    #[test]
    fn touching_faces_do_not_share_voxels() {
        // faces at x = ±0.025 pass through voxel centres of a 0.01 lattice
        let g = voxelize(&cube_asset(0.05), &Pose::default(), 0.01).unwrap();
        let (min, max) = g.occupied_bounds().unwrap();
        assert_eq!(max[0] - min[0] + 1, 4);
        assert_eq!(max[2] - min[2] + 1, 5);
    }

    #[test]
    fn mesh_cube_matches_primitive() {
        let mesh = TriMesh::unit_box([0.1, 0.06, 0.08]);
        let mut asset = cube_asset(1.0);
        asset.shape = Shape::Mesh(std::sync::Arc::new(mesh));
        let pose = Pose::new(0.013, -0.021, 0.0, 0.3);
        let gm = voxelize(&asset, &pose, 0.01).unwrap();
        let gp = voxelize(
            &AssetRecord::primitive(
                "b",
                Primitive::Box {
                    size: [0.1, 0.06, 0.08],
                },
            ),
            &pose,
            0.01,
        )
        .unwrap();
        assert_eq!(gm, gp);
    }

    #[test]
    fn open_mesh_is_rejected() {
        let mut mesh = TriMesh::unit_box([0.1, 0.1, 0.1]);
        mesh.drop_faces(2); // remove the bottom
        let mut asset = cube_asset(1.0);
        asset.shape = Shape::Mesh(std::sync::Arc::new(mesh));
        assert!(matches!(
            voxelize(&asset, &Pose::default(), 0.01),
            Err(GeometryError::NonWatertight(_))
        ));
    }
}
