use serde::{Deserialize, Serialize};

use crate::catalog::Catalog;
use crate::geometry::{clip_convex, hull_points, polygon_area, union_area, Point2};
use crate::scene::SceneState;

/// Layout heuristics over the object footprints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneMetrics {
    /// Area of the union of footprints on the surface over the surface area.
    pub surface_coverage: f64,
    /// Area of the union of footprints over the area of its convex hull; 1
    /// for an empty scene.
    pub compactness: f64,
    pub object_count: usize,
}

pub fn scene_metrics(scene: &SceneState, catalog: &Catalog) -> SceneMetrics {
    let table = scene.bounds.polygon();
    let polys: Vec<Vec<Point2>> = scene
        .with_assets(catalog)
        .map(|(o, a)| o.footprint(a).vertices().to_vec())
        .collect();
    if polys.is_empty() {
        return SceneMetrics {
            surface_coverage: 0.0,
            compactness: 1.0,
            object_count: 0,
        };
    }
    let on_table: Vec<Vec<Point2>> = polys
        .iter()
        .map(|p| clip_convex(p, &table))
        .filter(|p| p.len() >= 3)
        .collect();
    let coverage = (union_area(&on_table) / scene.bounds.area()).clamp(0.0, 1.0);
    let all: Vec<Point2> = polys.iter().flatten().copied().collect();
    let hull_area = polygon_area(&hull_points(&all));
    let compactness = if hull_area > 0.0 {
        (union_area(&polys) / hull_area).clamp(0.0, 1.0)
    } else {
        1.0
    };
    SceneMetrics {
        surface_coverage: coverage,
        compactness,
        object_count: scene.len(),
    }
}
