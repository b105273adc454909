mod common;

use common::{catalog, place, table};
use proptest::prelude::*;
use tabletop::geometry::Vector3;
use tabletop::physics::{
    settle_distance, ProcessBackend, QuasiStatic, SimulationBackend, DEFAULT_SETTLE_STEPS,
};
use tabletop::scene::SceneState;
use tabletop::spatial::Pose;

const RES: f64 = 0.01;

fn backend() -> QuasiStatic {
    QuasiStatic::new(RES)
}

#[test]
fn box_flat_on_table_stays() {
    let cat = catalog();
    let mut s = SceneState::new(table());
    place(
        &mut s,
        &cat,
        "book_0",
        "book",
        Pose::new(0.0, 0.0, 0.0, 0.3),
    );
    let r = backend().settle(&s, &cat, DEFAULT_SETTLE_STEPS).unwrap();
    assert!(!r.objects[0].fell);
    assert_eq!(r.objects[0].displacement, 0.0);
    assert_eq!(r.support.len(), 1);
    assert_eq!(r.support[0].supporter, "root");
}

#[test]
fn box_mostly_off_the_edge_falls() {
    let cat = catalog();
    let mut s = SceneState::new(table());
    // 5 cm cube with 3 cm (60%) beyond x = 0.5.
    place(
        &mut s,
        &cat,
        "cube_0",
        "cube",
        Pose::new(0.505, 0.0, 0.0, 0.0),
    );
    let r = backend().settle(&s, &cat, DEFAULT_SETTLE_STEPS).unwrap();
    assert!(r.objects[0].fell);
    assert_eq!(r.objects[0].displacement, 1.0);
}

/// Support interval along x of a box of half-width `h` centred at `c` on a
/// lower box centred at `cl`: centres of the shared lattice cells.
fn contact_span(c: f64, cl: f64, h: f64) -> (f64, f64) {
    let lo = (c - h).max(cl - h);
    let hi = (c + h).min(cl + h);
    (lo + 0.5 * RES, hi - 0.5 * RES)
}

#[test]
fn stack_falls_where_the_aggregate_com_leaves_the_support() {
    let cat = tabletop::catalog::Catalog::from_records([common::boxed("block", [0.1, 0.1, 0.1])])
        .unwrap();
    let mut s = SceneState::new(table());
    let xs = [0.0, 0.03, 0.05];
    for (n, x) in xs.iter().enumerate() {
        place(
            &mut s,
            &cat,
            &format!("block_{n}"),
            "block",
            Pose::new(*x, 0.0, 0.1 * n as f64, 0.0),
        );
    }
    s.objects[2].com_shift = Vector3::new(0.024, 0.0, 0.0);

    // Statics oracle by hand: per body, the mean x of itself and everything above.
    let com = [xs[0], xs[1], xs[2] + 0.024];
    let agg = |from: usize| com[from..].iter().sum::<f64>() / (3 - from) as f64;
    let span = [
        (-0.045, 0.045),
        contact_span(xs[1], xs[0], 0.05),
        contact_span(xs[2], xs[1], 0.05),
    ];
    let mut expect_fell = [false; 3];
    for n in 0..3 {
        let (lo, hi) = span[n];
        let out = agg(n) < lo - 1e-12 || agg(n) > hi + 1e-12;
        expect_fell[n] = out || (n > 0 && expect_fell[n - 1]);
    }
    assert_eq!(expect_fell, [false, true, true]);

    let r = backend().settle(&s, &cat, DEFAULT_SETTLE_STEPS).unwrap();
    let got: Vec<bool> = r.objects.iter().map(|b| b.fell).collect();
    assert_eq!(got, expect_fell);

    // Without the shift the same stack stands.
    s.objects[2].com_shift = Vector3::zeros();
    let r = backend().settle(&s, &cat, DEFAULT_SETTLE_STEPS).unwrap();
    assert!(!r.any_fell());
    assert_eq!(r.supporters("block_2").collect::<Vec<_>>(), vec!["block_1"]);
}

#[test]
fn settle_distance_of_a_floating_object() {
    let cat = catalog();
    let mut s = SceneState::new(table());
    place(
        &mut s,
        &cat,
        "book_0",
        "book",
        Pose::new(-0.2, -0.2, 0.0, 0.0),
    );
    place(
        &mut s,
        &cat,
        "cube_0",
        "cube",
        Pose::new(0.2, 0.2, 0.3, 0.0),
    );
    let d = settle_distance(&backend(), &s, &cat, DEFAULT_SETTLE_STEPS).unwrap();
    assert!((d - 0.3 / 2.0).abs() < 1e-9, "{d}");
    let r = backend().settle(&s, &cat, DEFAULT_SETTLE_STEPS).unwrap();
    assert!(r.get("cube_0").unwrap().pose.unwrap().position.z.abs() < 1e-9);
}

#[test]
fn settle_distance_with_one_toppling_object() {
    let cat = catalog();
    let mut s = SceneState::new(table());
    place(
        &mut s,
        &cat,
        "book_0",
        "book",
        Pose::new(-0.2, -0.2, 0.0, 0.0),
    );
    place(
        &mut s,
        &cat,
        "book_1",
        "book",
        Pose::new(0.2, -0.2, 0.0, 0.0),
    );
    place(
        &mut s,
        &cat,
        "plate_0",
        "plate",
        Pose::new(-0.2, 0.2, 0.0, 0.0),
    );
    place(
        &mut s,
        &cat,
        "cube_0",
        "cube",
        Pose::new(0.505, 0.3, 0.0, 0.0),
    );
    let d = settle_distance(&backend(), &s, &cat, DEFAULT_SETTLE_STEPS).unwrap();
    assert!((d - 0.25).abs() < 1e-12, "{d}");
}

#[test]
fn isolated_mass_does_not_change_the_outcome() {
    let cat = catalog();
    for x in [0.0, 0.49, 0.5, 0.505, 0.52] {
        let mut s = SceneState::new(table());
        place(&mut s, &cat, "cube_0", "cube", Pose::new(x, 0.0, 0.0, 0.0));
        let base = backend().settle(&s, &cat, 1).unwrap().objects[0].fell;
        for m in [1e-3, 1.0, 1e3] {
            s.objects[0].mass = m;
            assert_eq!(backend().settle(&s, &cat, 1).unwrap().objects[0].fell, base);
        }
    }
}

#[test]
fn slope_steeper_than_friction_slides() {
    let cat = tabletop::catalog::Catalog::from_records([
        common::boxed("slab", [0.4, 0.4, 0.02]),
        common::boxed("block", [0.1, 0.1, 0.05]).with_friction(0.1, 0.1),
    ])
    .unwrap();
    let mut s = SceneState::new(table());
    place(
        &mut s,
        &cat,
        "slab_0",
        "slab",
        Pose::new(0.0, 0.0, 0.05, 0.0),
    );
    // Tilt the supporting slab by ~17 degrees about y (tan = 0.3).
    s.objects[0].tilt = Vector3::new(0.0, 0.3f64.atan(), 0.0);
    place(
        &mut s,
        &cat,
        "block_0",
        "block",
        Pose::new(0.0, 0.0, 0.2, 0.0),
    );
    // The block lies flush on the slope.
    s.objects[1].tilt = s.objects[0].tilt;
    let r = backend().settle(&s, &cat, 1).unwrap();
    assert!(r.get("block_0").unwrap().fell);
    s.objects[1].friction = 0.8;
    let r = backend().settle(&s, &cat, 1).unwrap();
    assert!(!r.get("block_0").unwrap().fell);
}

#[test]
fn process_backend_round_trip() {
    let cat = catalog();
    let mut s = SceneState::new(table());
    place(
        &mut s,
        &cat,
        "cube_0",
        "cube",
        Pose::new(0.0, 0.0, 0.0, 0.0),
    );
    let script = r#"read line; echo '{"objects":[{"id":"cube_0","displacement":3.5,"fell":false}],"support":[]}'"#;
    let b = ProcessBackend::new("sh", ["-c", script]);
    let r = b.settle(&s, &cat, 400).unwrap();
    assert_eq!(r.objects[0].displacement, 1.0);

    let bad = ProcessBackend::new("sh", ["-c", r#"read line; echo '{"objects":[]}'"#]);
    assert!(bad.settle(&s, &cat, 400).is_err());
}

#[test]
fn request_snapshot_is_one_json_line() {
    let cat = catalog();
    let mut s = SceneState::new(table());
    place(&mut s, &cat, "cup_0", "cup", Pose::new(0.1, 0.0, 0.0, 0.5));
    let snap = tabletop::physics::SceneSnapshot::new(&s, &cat, 400).unwrap();
    let line = serde_json::to_string(&snap).unwrap();
    assert!(!line.contains('\n'));
    let back: tabletop::physics::SceneSnapshot = serde_json::from_str(&line).unwrap();
    assert_eq!(back, snap);
}

fn random_scene() -> impl Strategy<Value = Vec<(f64, f64, f64, f64)>> {
    prop::collection::vec(
        (-0.4f64..0.4, -0.4f64..0.4, 0.0f64..0.3, 0.0f64..6.28),
        1..8,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn settling_is_idempotent_and_acyclic(objs in random_scene()) {
        let cat = catalog();
        let mut s = SceneState::new(table());
        for (n, (x, y, z, yaw)) in objs.iter().enumerate() {
            let asset = ["book", "cube", "cup", "plate"][n % 4];
            place(&mut s, &cat, &format!("{asset}_{n}"), asset, Pose::new(*x, *y, *z, *yaw));
        }
        let b = backend();
        let r1 = b.settle(&s, &cat, 1).unwrap();
        prop_assert_eq!(&r1, &b.settle(&s, &cat, 1).unwrap());
        let settled = r1.apply_to(&s);
        let r2 = b.settle(&settled, &cat, 1).unwrap();
        for o in &r2.objects {
            prop_assert!(o.displacement <= RES + 1e-12, "{} moved {}", o.id, o.displacement);
        }
        // Edges only point from earlier-settled (lower) bodies upward: no cycles.
        let ids: Vec<&str> = settled.objects.iter().map(|o| o.id.as_str()).collect();
        let mut indeg = std::collections::BTreeMap::new();
        for e in &r2.support {
            if e.supporter != "root" { *indeg.entry(e.supported.as_str()).or_insert(0) += 1; }
        }
        let mut done = std::collections::BTreeSet::new();
        let mut progress = true;
        while progress {
            progress = false;
            for id in &ids {
                if done.contains(id) { continue; }
                if r2.supporters(id).all(|s| s == "root" || done.contains(s)) {
                    done.insert(*id);
                    progress = true;
                }
            }
        }
        prop_assert_eq!(done.len(), ids.len());
        for o in &r2.objects {
            prop_assert!(o.fell || r2.supporters(&o.id).next().is_some());
        }
    }
}
