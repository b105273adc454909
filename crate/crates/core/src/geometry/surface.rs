use super::{point_in_hull, OccupancyGrid, Point2};

/// 2D boolean grid aligned with the x–y plane of an occupancy grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceMask {
    /// World x–y of the lower corner of cell (0, 0).
    pub origin: Point2,
    pub resolution: f64,
    pub nx: usize,
    pub ny: usize,
    cells: Vec<bool>,
}

impl SurfaceMask {
    pub fn new(origin: Point2, resolution: f64, nx: usize, ny: usize) -> Self {
        Self {
            origin,
            resolution,
            nx,
            ny,
            cells: vec![false; nx * ny],
        }
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        i < self.nx && j < self.ny && self.cells[i * self.ny + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: bool) {
        self.cells[i * self.ny + j] = v;
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.cells.iter().any(|&c| c)
    }

    pub fn cell_center(&self, i: usize, j: usize) -> Point2 {
        Point2::new(
            self.origin.x + (i as f64 + 0.5) * self.resolution,
            self.origin.y + (j as f64 + 0.5) * self.resolution,
        )
    }

    pub fn cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.nx).flat_map(move |i| {
            (0..self.ny)
                .filter(move |&j| self.get(i, j))
                .map(move |j| (i, j))
        })
    }

    pub fn centers(&self) -> Vec<Point2> {
        self.cells().map(|(i, j)| self.cell_center(i, j)).collect()
    }

    /// Cells on the mask boundary (4-neighbourhood), a measure of the
    /// quantization error of ratios over this mask.
    pub fn ring_count(&self) -> usize {
        self.cells()
            .filter(|&(i, j)| {
                i == 0
                    || j == 0
                    || !self.get(i - 1, j)
                    || !self.get(i + 1, j)
                    || !self.get(i, j - 1)
                    || !self.get(i, j + 1)
            })
            .count()
    }
}

/// Columns holding an occupied voxel within `k_bottom` layers of the
/// object's globally lowest occupied layer.
pub fn bottom_surface(object: &OccupancyGrid, k_bottom: usize) -> SurfaceMask {
    assert!(k_bottom >= 1, "k_bottom must be at least 1");
    let [nx, ny, _] = object.dims();
    let o = object.origin();
    let mut mask = SurfaceMask::new(Point2::new(o.x, o.y), object.resolution(), nx, ny);
    let Some(k_min) = (0..nx)
        .flat_map(|i| (0..ny).filter_map(move |j| object.column_lowest(i, j)))
        .min()
    else {
        return mask;
    };
    for i in 0..nx {
        for j in 0..ny {
            if (k_min..k_min + k_bottom).any(|k| object.get(i, j, k)) {
                mask.set(i, j, true);
            }
        }
    }
    mask
}

/// A bottom cell of a placed object with the scene voxel found beneath it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContactCell {
    /// Column in object-grid coordinates.
    pub i: usize,
    pub j: usize,
    /// Scene voxel (scene-grid coordinates) that supports the column.
    pub scene: [usize; 3],
}

/// Bottom cells of `object` translated by `offset` that have an occupied
/// scene voxel within `k_search` layers directly below the column's lowest
/// object voxel. The highest such scene voxel is reported.
pub fn contact_cells(
    object: &OccupancyGrid,
    offset: [usize; 3],
    scene: &OccupancyGrid,
    k_bottom: usize,
    k_search: usize,
) -> Vec<ContactCell> {
    let bottom = bottom_surface(object, k_bottom);
    let mut out = Vec::new();
    for (i, j) in bottom.cells() {
        let Some(k_low) = object.column_lowest(i, j) else {
            continue;
        };
        let (sx, sy, sz) = (i + offset[0], j + offset[1], k_low + offset[2]);
        for s in 1..=k_search.min(sz) {
            if scene.get(sx, sy, sz - s) {
                out.push(ContactCell {
                    i,
                    j,
                    scene: [sx, sy, sz - s],
                });
                break;
            }
        }
    }
    out
}

/// Contact surface of `object` at `offset` as a mask in world coordinates.
pub fn contact_surface(
    object: &OccupancyGrid,
    offset: [usize; 3],
    scene: &OccupancyGrid,
    k_bottom: usize,
    k_search: usize,
) -> SurfaceMask {
    let [nx, ny, _] = object.dims();
    let so = scene.origin();
    let res = scene.resolution();
    let origin = Point2::new(so.x + offset[0] as f64 * res, so.y + offset[1] as f64 * res);
    let mut mask = SurfaceMask::new(origin, res, nx, ny);
    for c in contact_cells(object, offset, scene, k_bottom, k_search) {
        mask.set(c.i, c.j, true);
    }
    mask
}

/// Support test: the projected centre of mass lies inside (or on) the convex
/// hull of the contact-cell centres.
pub fn support_valid(contact: &SurfaceMask, com_xy: &Point2) -> bool {
    let centers = contact.centers();
    !centers.is_empty() && point_in_hull(&centers, com_xy, 1e-9 * contact.resolution.max(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point3;

    #[test]
    fn solid_block_bottom_is_full() {
        let g = OccupancyGrid::from_fn(Point3::origin(), 0.01, [2, 2, 2], |_, _, _| true);
        assert_eq!(bottom_surface(&g, 1).count(), 4);
    }

    #[test]
    fn mug_handle_depends_on_k_bottom() {
        // body: columns x∈0..3 from z=0; handle: column x=4 occupying z 3..5
        let mug = OccupancyGrid::from_fn(Point3::origin(), 0.01, [5, 1, 6], |i, _, k| {
            if i < 3 {
                k < 6
            } else {
                i == 4 && (3..5).contains(&k)
            }
        });
        let b1 = bottom_surface(&mug, 1);
        assert_eq!(b1.cells().collect::<Vec<_>>(), vec![(0, 0), (1, 0), (2, 0)]);
        let b5 = bottom_surface(&mug, 5);
        assert_eq!(
            b5.cells().collect::<Vec<_>>(),
            vec![(0, 0), (1, 0), (2, 0), (4, 0)]
        );
    }

    #[test]
    fn support_on_hull_edge_counts() {
        let mut m = SurfaceMask::new(Point2::new(0.0, 0.0), 1.0, 3, 3);
        for i in 0..3 {
            for j in 0..3 {
                m.set(i, j, true);
            }
        }
        assert!(support_valid(&m, &Point2::new(1.5, 1.5)));
        assert!(support_valid(&m, &Point2::new(2.5, 1.0)));
        assert!(!support_valid(&m, &Point2::new(2.6, 1.0)));
    }
}
