use serde::{Deserialize, Serialize};

use crate::catalog::Catalog;
use crate::geometry::{overlap_area, Footprint, Point2};
use crate::scene::SceneState;

/// Side of an object, in the table frame (front is +x, left is +y).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Front,
    Back,
    Left,
    Right,
}

impl Direction {
    /// Preposition used in feedback sentences.
    pub fn phrase(self) -> &'static str {
        match self {
            Direction::Front => "in front of",
            Direction::Back => "behind",
            Direction::Left => "to the left of",
            Direction::Right => "to the right of",
        }
    }

    /// Side of `from` on which `to` lies.
    pub fn between(from: &Point2, to: &Point2) -> Direction {
        let d = to - from;
        if d.x.abs() >= d.y.abs() {
            if d.x >= 0.0 {
                Direction::Front
            } else {
                Direction::Back
            }
        } else if d.y >= 0.0 {
            Direction::Left
        } else {
            Direction::Right
        }
    }
}

/// An axis-aligned free rectangle on the surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmptyRegion {
    pub min: Point2,
    pub max: Point2,
    pub area: f64,
    /// Object whose footprint is closest to the region centre.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nearest: Option<String>,
    /// Side of the nearest object on which the region lies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<Direction>,
}

impl EmptyRegion {
    pub fn center(&self) -> Point2 {
        Point2::new(
            0.5 * (self.min.x + self.max.x),
            0.5 * (self.min.y + self.max.y),
        )
    }

    pub fn polygon(&self) -> Vec<Point2> {
        vec![
            self.min,
            Point2::new(self.max.x, self.min.y),
            self.max,
            Point2::new(self.min.x, self.max.y),
        ]
    }
}

/// Footprints rasterized onto the surface cells. A cell is occupied when a
/// footprint covers any of its area.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceRaster {
    pub origin: Point2,
    pub resolution: f64,
    pub nx: usize,
    pub ny: usize,
    pub occupied: Vec<bool>,
}

/// Overlap below this many square meters is treated as touching.
const AREA_EPS: f64 = 1e-14;

impl SurfaceRaster {
    pub fn build(scene: &SceneState, catalog: &Catalog, resolution: f64) -> Self {
        let b = scene.bounds;
        let cells = |len: f64| ((len / resolution - 0.5) - 1e-9).ceil().max(1.0) as usize;
        let (nx, ny) = (cells(b.depth()), cells(b.width()));
        let origin = Point2::new(b.min_x, b.min_y);
        let mut occupied = vec![false; nx * ny];
        for (o, a) in scene.with_assets(catalog) {
            let fp = o.footprint(a);
            let (lo, hi) = fp.aabb();
            let range = |lo: f64, hi: f64, o: f64, n: usize| {
                let a = ((lo - o) / resolution).floor().max(0.0) as usize;
                let b = (((hi - o) / resolution).ceil().max(0.0) as usize).min(n);
                a..b
            };
            for i in range(lo.x, hi.x, origin.x, nx) {
                for j in range(lo.y, hi.y, origin.y, ny) {
                    if !occupied[i * ny + j]
                        && overlap_area(&fp, &Self::cell_polygon(origin, resolution, i, j))
                            > AREA_EPS
                    {
                        occupied[i * ny + j] = true;
                    }
                }
            }
        }
        Self {
            origin,
            resolution,
            nx,
            ny,
            occupied,
        }
    }

    fn cell_polygon(origin: Point2, res: f64, i: usize, j: usize) -> Footprint {
        let x = origin.x + i as f64 * res;
        let y = origin.y + j as f64 * res;
        crate::geometry::convex_hull_2d(&[
            Point2::new(x, y),
            Point2::new(x + res, y),
            Point2::new(x + res, y + res),
            Point2::new(x, y + res),
        ])
        .expect("cells are non-degenerate")
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.occupied[i * self.ny + j]
    }
}

/// Largest all-free rectangle as inclusive cell ranges `(i0, j0, i1, j1)`;
/// the first one found in row-major order wins ties.
fn largest_free_rectangle(
    free: &[bool],
    nx: usize,
    ny: usize,
) -> Option<(usize, usize, usize, usize)> {
    let mut heights = vec![0usize; ny];
    let mut best: Option<(usize, (usize, usize, usize, usize))> = None;
    for i in 0..nx {
        for j in 0..ny {
            heights[j] = if free[i * ny + j] { heights[j] + 1 } else { 0 };
        }
        // Largest rectangle under the histogram of free run lengths ending at row i.
        let mut stack: Vec<usize> = Vec::new();
        for j in 0..=ny {
            let h = if j < ny { heights[j] } else { 0 };
            while let Some(&top) = stack.last() {
                if heights[top] < h {
                    break;
                }
                stack.pop();
                let height = heights[top];
                if height == 0 {
                    continue;
                }
                let left = stack.last().map_or(0, |&l| l + 1);
                let area = height * (j - left);
                if best.is_none_or(|(a, _)| area > a) {
                    best = Some((area, (i + 1 - height, left, i, j - 1)));
                }
            }
            stack.push(j);
        }
    }
    best.map(|(_, r)| r)
}

/// Greedy non-overlapping empty rectangles, largest first, down to
/// `min_area` square meters. Each region records the nearest object and the
/// side of it the region is on.
pub fn detect_empty_regions(
    scene: &SceneState,
    catalog: &Catalog,
    resolution: f64,
    min_area: f64,
) -> Vec<EmptyRegion> {
    let raster = SurfaceRaster::build(scene, catalog, resolution);
    let (nx, ny) = (raster.nx, raster.ny);
    let b = scene.bounds;
    let mut free: Vec<bool> = raster.occupied.iter().map(|o| !o).collect();
    let footprints: Vec<(String, Footprint, Point2)> = scene
        .with_assets(catalog)
        .map(|(o, a)| (o.id.clone(), o.footprint(a), o.pose.xy()))
        .collect();
    let mut out = Vec::new();
    while let Some((i0, j0, i1, j1)) = largest_free_rectangle(&free, nx, ny) {
        let r = resolution;
        let min = Point2::new(
            raster.origin.x + i0 as f64 * r,
            raster.origin.y + j0 as f64 * r,
        );
        let max = Point2::new(
            (raster.origin.x + (i1 + 1) as f64 * r).min(b.max_x),
            (raster.origin.y + (j1 + 1) as f64 * r).min(b.max_y),
        );
        let area = (max.x - min.x) * (max.y - min.y);
        if area < min_area || area <= 0.0 {
            break;
        }
        for i in i0..=i1 {
            for j in j0..=j1 {
                free[i * ny + j] = false;
            }
        }
        let mut region = EmptyRegion {
            min,
            max,
            area,
            nearest: None,
            direction: None,
        };
        let c = region.center();
        let nearest = footprints
            .iter()
            .map(|(id, fp, p)| (fp.distance_to(&c), id, p))
            .fold(None::<(f64, &String, &Point2)>, |best, cur| match best {
                Some(b) if b.0 <= cur.0 => Some(b),
                _ => Some(cur),
            });
        if let Some((_, id, p)) = nearest {
            region.nearest = Some(id.clone());
            region.direction = Some(Direction::between(p, &c));
        }
        out.push(region);
    }
    out
}

/// Default smallest reported region: four times the smallest footprint in
/// the scene, or zero for an empty scene.
pub fn default_min_area(scene: &SceneState, catalog: &Catalog) -> f64 {
    scene
        .with_assets(catalog)
        .map(|(o, a)| o.footprint(a).area())
        .fold(None, |m: Option<f64>, a| Some(m.map_or(a, |m| m.min(a))))
        .map_or(0.0, |a| 4.0 * a)
}
