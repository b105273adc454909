use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Bounds2D, Pose};
use crate::catalog::{AssetRecord, Catalog};
use crate::geometry::{overlap_area, Footprint, Vector2};

/// One term of the spatial penalty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    Overlap { a: String, b: String, area: f64 },
    OutOfBounds { id: String, distance: f64 },
}

/// World footprint of an asset at a pose.
pub fn world_footprint(asset: &AssetRecord, pose: &Pose) -> Footprint {
    asset
        .footprint(pose.yaw)
        .translated(Vector2::new(pose.position.x, pose.position.y))
}

/// How far a footprint sticks out of the bounds: the Euclidean norm of the
/// per-axis protrusions (zero when fully inside).
pub fn boundary_violation(fp: &Footprint, bounds: &Bounds2D) -> f64 {
    let (lo, hi) = fp.aabb();
    let ex = (bounds.min_x - lo.x).max(0.0) + (hi.x - bounds.max_x).max(0.0);
    let ey = (bounds.min_y - lo.y).max(0.0) + (hi.y - bounds.max_y).max(0.0);
    (ex * ex + ey * ey).sqrt()
}

/// Penalty with its non-zero terms. `assets` maps object id to asset id.
pub fn penalty_breakdown(
    poses: &BTreeMap<String, Pose>,
    assets: &BTreeMap<String, String>,
    catalog: &Catalog,
    bounds: &Bounds2D,
) -> (f64, Vec<Violation>) {
    let fps: Vec<(&String, Footprint)> = poses
        .iter()
        .map(|(id, pose)| {
            let asset = catalog
                .get(&assets[id])
                .expect("layout assets come from the catalog");
            (id, world_footprint(asset, pose))
        })
        .collect();
    let mut total = 0.0;
    let mut violations = Vec::new();
    for i in 0..fps.len() {
        for j in i + 1..fps.len() {
            let area = overlap_area(&fps[i].1, &fps[j].1);
            if area > 0.0 {
                total += area;
                violations.push(Violation::Overlap {
                    a: fps[i].0.clone(),
                    b: fps[j].0.clone(),
                    area,
                });
            }
        }
    }
    for (id, fp) in &fps {
        let d = boundary_violation(fp, bounds);
        if d > 0.0 {
            total += d;
            violations.push(Violation::OutOfBounds {
                id: (*id).clone(),
                distance: d,
            });
        }
    }
    (total, violations)
}

pub fn penalty(
    poses: &BTreeMap<String, Pose>,
    assets: &BTreeMap<String, String>,
    catalog: &Catalog,
    bounds: &Bounds2D,
) -> f64 {
    penalty_breakdown(poses, assets, catalog, bounds).0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shape::Primitive;

    fn setup() -> (Catalog, Bounds2D) {
        let cat = Catalog::from_records([AssetRecord::primitive(
            "sq_a",
            Primitive::Box {
                size: [1.0, 1.0, 0.1],
            },
        )])
        .unwrap();
        (cat, Bounds2D::new(-5.0, 5.0, -5.0, 5.0, 0.0).unwrap())
    }

    fn layout(ps: &[(&str, Pose)]) -> (BTreeMap<String, Pose>, BTreeMap<String, String>) {
        let poses = ps.iter().map(|(id, p)| (id.to_string(), *p)).collect();
        let assets = ps
            .iter()
            .map(|(id, _)| (id.to_string(), "sq_a".to_string()))
            .collect();
        (poses, assets)
    }

    #[test]
    fn disjoint_is_zero() {
        let (cat, b) = setup();
        let (p, a) = layout(&[
            ("a_0", Pose::new(0.0, 0.0, 0.0, 0.0)),
            ("b_0", Pose::new(2.0, 0.0, 0.0, 0.0)),
        ]);
        assert_eq!(penalty(&p, &a, &cat, &b), 0.0);
    }

    #[test]
    fn coincident_squares_cost_their_area() {
        let (cat, b) = setup();
        let (p, a) = layout(&[
            ("a_0", Pose::new(0.0, 0.0, 0.0, 0.0)),
            ("b_0", Pose::new(0.0, 0.0, 0.0, 0.0)),
        ]);
        assert!((penalty(&p, &a, &cat, &b) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn straddling_the_edge_costs_half_extent() {
        let (cat, b) = setup();
        let (p, a) = layout(&[("a_0", Pose::new(5.0, 0.0, 0.0, 0.0))]);
        assert!((penalty(&p, &a, &cat, &b) - 0.5).abs() < 1e-12);
    }
}
