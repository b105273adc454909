mod common;

use common::{boxed, catalog, place, table};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tabletop::catalog::Catalog;
use tabletop::dsl::GrammarIssue;
use tabletop::feedback::{
    default_min_area, detect_empty_regions, diagnose_failure, grammar_report, issue_sentence,
    scene_metrics, success_report, Channel, Direction, EmptyRegion, Failure, FeedbackReport, Issue,
    SuccessOptions, VqaClient, VqaOutcome,
};
use tabletop::geometry::{
    convex_hull_2d, hull_points, overlap_area, point_in_hull, Footprint, Point2,
};
use tabletop::physical::PhysicalError;
use tabletop::physics::QuasiStatic;
use tabletop::scene::SceneState;
use tabletop::spatial::Pose;

fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Footprint {
    convex_hull_2d(&[
        Point2::new(x0, y0),
        Point2::new(x1, y0),
        Point2::new(x1, y1),
        Point2::new(x0, y1),
    ])
    .unwrap()
}

fn region_fp(r: &EmptyRegion) -> Footprint {
    rect(r.min.x, r.min.y, r.max.x, r.max.y)
}

fn footprints(scene: &SceneState, cat: &Catalog) -> Vec<Footprint> {
    scene
        .with_assets(cat)
        .map(|(o, a)| o.footprint(a))
        .collect()
}

fn random_scene(cat: &Catalog, seed: u64) -> SceneState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = SceneState::new(table());
    for (n, asset) in ["book", "notebook", "cube", "plate", "cup", "vase"]
        .iter()
        .enumerate()
    {
        let pose = Pose::new(
            rng.random_range(-0.45..0.45),
            rng.random_range(-0.45..0.45),
            0.0,
            rng.random_range(0.0..std::f64::consts::TAU),
        );
        place(&mut s, cat, &format!("{asset}_{n}"), asset, pose);
    }
    s
}

/// Largest grid-aligned empty rectangle by exhaustive enumeration, in cells.
fn brute_largest(occupied: &[Vec<bool>]) -> usize {
    let (nx, ny) = (occupied.len(), occupied[0].len());
    let mut prefix = vec![vec![0usize; ny + 1]; nx + 1];
    for i in 0..nx {
        for j in 0..ny {
            prefix[i + 1][j + 1] =
                occupied[i][j] as usize + prefix[i][j + 1] + prefix[i + 1][j] - prefix[i][j];
        }
    }
    let mut best = 0;
    for i0 in 0..nx {
        for i1 in i0 + 1..=nx {
            for j0 in 0..ny {
                for j1 in j0 + 1..=ny {
                    let filled = prefix[i1][j1] + prefix[i0][j0] - prefix[i0][j1] - prefix[i1][j0];
                    if filled > 0 {
                        break;
                    }
                    best = best.max((i1 - i0) * (j1 - j0));
                }
            }
        }
    }
    best
}

#[test]
fn empty_table_is_one_region() {
    let cat = catalog();
    let s = SceneState::new(table());
    let regions = detect_empty_regions(&s, &cat, 0.01, 0.0);
    assert_eq!(regions.len(), 1);
    let r = &regions[0];
    assert!((r.area - 1.0).abs() < 1e-9, "area {}", r.area);
    assert!(
        (r.min - Point2::new(-0.5, -0.5)).norm() < 1e-9
            && (r.max - Point2::new(0.5, 0.5)).norm() < 1e-9
    );
    assert_eq!(r.nearest, None);
}

#[test]
fn region_behind_a_centred_laptop() {
    let cat = catalog();
    let mut s = SceneState::new(table());
    place(
        &mut s,
        &cat,
        "laptop_0",
        "laptop",
        Pose::new(0.0, 0.0, 0.0, std::f64::consts::FRAC_PI_2),
    );
    let regions = detect_empty_regions(&s, &cat, 0.01, default_min_area(&s, &cat));
    let back = regions
        .iter()
        .find(|r| r.direction == Some(Direction::Back))
        .expect("a region behind the laptop");
    assert_eq!(back.nearest.as_deref(), Some("laptop_0"));
    // The laptop is 0.22 m deep once turned, leaving 0.39 m behind it.
    assert!((back.area - 0.39).abs() < 1e-6, "area {}", back.area);
    assert!(back.max.x <= -0.11 + 1e-9);

    let report = diagnose_failure(
        Failure::Fell(&["laptop_0".to_string()]),
        &s,
        &cat,
        None,
        0.01,
    );
    assert!(
        report.text.contains("empty region behind `laptop_0`"),
        "{}",
        report.text
    );
}

#[test]
fn random_scene_regions_are_empty_maximal_and_disjoint() {
    let cat = catalog();
    let res = 0.02;
    for seed in 0..8 {
        let s = random_scene(&cat, seed);
        let fps = footprints(&s, &cat);
        let min_area = default_min_area(&s, &cat);
        let regions = detect_empty_regions(&s, &cat, res, min_area);
        assert!(!regions.is_empty(), "seed {seed}");

        let n = (1.0 / res).round() as usize;
        let occupied: Vec<Vec<bool>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let (x, y) = (-0.5 + i as f64 * res, -0.5 + j as f64 * res);
                        let cell = rect(x, y, x + res, y + res);
                        fps.iter().any(|f| overlap_area(f, &cell) > 1e-14)
                    })
                    .collect()
            })
            .collect();
        let best = brute_largest(&occupied) as f64 * res * res;
        assert!(
            (regions[0].area - best).abs() < 1e-9,
            "seed {seed}: first region {} vs exhaustive {best}",
            regions[0].area
        );

        for (k, r) in regions.iter().enumerate() {
            assert!(r.area >= min_area - 1e-12);
            if k > 0 {
                assert!(
                    r.area <= regions[k - 1].area + 1e-12,
                    "regions are largest first"
                );
            }
            assert!(
                r.min.x >= -0.5 - 1e-9
                    && r.min.y >= -0.5 - 1e-9
                    && r.max.x <= 0.5 + 1e-9
                    && r.max.y <= 0.5 + 1e-9
            );
            let poly = region_fp(r);
            for f in &fps {
                assert!(
                    overlap_area(f, &poly) < 1e-12,
                    "seed {seed}: region {k} overlaps an object"
                );
            }
            for earlier in &regions[..k] {
                assert!(
                    overlap_area(&region_fp(earlier), &poly) < 1e-12,
                    "seed {seed}: regions overlap"
                );
            }
            // Growing by one cell on any side leaves the table, hits an object, or hits an earlier region.
            let grown = [
                (r.min.x - res, r.min.y, r.max.x, r.max.y),
                (r.min.x, r.min.y - res, r.max.x, r.max.y),
                (r.min.x, r.min.y, r.max.x + res, r.max.y),
                (r.min.x, r.min.y, r.max.x, r.max.y + res),
            ];
            for (x0, y0, x1, y1) in grown {
                let outside =
                    x0 < -0.5 - 1e-9 || y0 < -0.5 - 1e-9 || x1 > 0.5 + 1e-9 || y1 > 0.5 + 1e-9;
                let g = rect(x0, y0, x1, y1);
                let blocked = fps.iter().any(|f| overlap_area(f, &g) > 1e-14)
                    || regions[..k]
                        .iter()
                        .any(|e| overlap_area(&region_fp(e), &g) > 1e-12);
                assert!(outside || blocked, "seed {seed}: region {k} is not maximal");
            }
        }
    }
}

#[test]
fn coverage_of_a_single_block() {
    let cat = Catalog::from_records([boxed("block", [0.1, 0.1, 0.1])]).unwrap();
    let mut s = SceneState::new(table());
    place(
        &mut s,
        &cat,
        "block_0",
        "block",
        Pose::new(0.0, 0.0, 0.0, 0.3),
    );
    let m = scene_metrics(&s, &cat);
    assert!((m.surface_coverage - 0.01).abs() < 1e-9);
    assert!((m.compactness - 1.0).abs() < 1e-9);
    assert_eq!(m.object_count, 1);

    // Half of it hangs over the front edge.
    let mut s = SceneState::new(table());
    place(
        &mut s,
        &cat,
        "block_0",
        "block",
        Pose::new(0.5, 0.0, 0.0, 0.0),
    );
    assert!((scene_metrics(&s, &cat).surface_coverage - 0.005).abs() < 1e-9);
}

#[test]
fn compactness_of_two_separated_blocks() {
    let cat = Catalog::from_records([boxed("block", [0.1, 0.1, 0.1])]).unwrap();
    let mut s = SceneState::new(table());
    place(
        &mut s,
        &cat,
        "block_0",
        "block",
        Pose::new(-0.3, 0.0, 0.0, 0.0),
    );
    place(
        &mut s,
        &cat,
        "block_1",
        "block",
        Pose::new(0.3, 0.0, 0.0, 0.0),
    );
    // Union 0.02 m² inside a 0.7 x 0.1 hull.
    assert!((scene_metrics(&s, &cat).compactness - 2.0 / 7.0).abs() < 1e-9);
}

#[test]
fn compactness_matches_monte_carlo() {
    let cat = catalog();
    for seed in 0..4 {
        let s = random_scene(&cat, 100 + seed);
        let fps = footprints(&s, &cat);
        let all: Vec<Point2> = fps.iter().flat_map(|f| f.vertices().to_vec()).collect();
        let hull = hull_points(&all);
        let (lo, hi) = all
            .iter()
            .fold((all[0], all[0]), |(lo, hi), p| (lo.inf(p), hi.sup(p)));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut in_union, mut in_hull) = (0usize, 0usize);
        for _ in 0..200_000 {
            let p = Point2::new(rng.random_range(lo.x..hi.x), rng.random_range(lo.y..hi.y));
            if point_in_hull(&hull, &p, 0.0) {
                in_hull += 1;
                if fps.iter().any(|f| f.contains(&p)) {
                    in_union += 1;
                }
            }
        }
        let estimate = in_union as f64 / in_hull as f64;
        let m = scene_metrics(&s, &cat);
        assert!(
            (m.compactness - estimate).abs() < 0.01,
            "seed {seed}: {} vs {estimate}",
            m.compactness
        );
    }
}

fn every_issue() -> Vec<Issue> {
    vec![
        Issue::Syntax {
            message: "expected `,`".into(),
            entry: None,
            line: Some(3),
            column: Some(7),
        },
        Issue::Grammar {
            issue: GrammarIssue::UnknownRelation {
                entry: 2,
                relation: "hover_over".into(),
            },
        },
        Issue::Unsolved {
            object: "cup_0".into(),
            missing: vec!["x".into(), "yaw".into()],
        },
        Issue::Penetration {
            a: "cup_0".into(),
            b: "plate_0".into(),
            area: 0.01,
        },
        Issue::OutOfBounds {
            object: "book_0".into(),
            distance: 0.05,
        },
        Issue::NoSupportedPlacement {
            object: "vase_0".into(),
            target: "book_0".into(),
            feasible_offsets: 12,
        },
        Issue::StackInfeasible {
            object: "ball_0".into(),
            target: "plate_0".into(),
            tried: 5,
            candidates: 40,
        },
        Issue::TargetNotSupporting {
            object: "cup_0".into(),
        },
        Issue::UnknownTarget {
            object: "shelf_0".into(),
        },
        Issue::RetrievalFailed {
            object: "teapot".into(),
        },
        Issue::NoCavity {
            container: "book_0".into(),
        },
        Issue::ContainerOverflow {
            container: "pen_holder_0".into(),
            placed: vec!["pen_0".into()],
            failed: vec!["pen_1".into()],
        },
        Issue::Fell {
            object: "lamp_0".into(),
        },
        Issue::Internal {
            object: None,
            message: "lattice too large".into(),
        },
    ]
}

#[test]
fn every_issue_appears_once_in_the_text() {
    let issues = every_issue();
    let report = grammar_report(issues.clone(), None);
    assert_eq!(report.issues.len(), issues.len());
    for issue in &issues {
        let line = format!("- {}", issue_sentence(issue));
        assert_eq!(
            report.text.lines().filter(|l| *l == line).count(),
            1,
            "{line}"
        );
    }
    // Sentences are distinct, so no issue can hide behind another.
    let mut sentences: Vec<String> = issues.iter().map(issue_sentence).collect();
    sentences.sort();
    sentences.dedup();
    assert_eq!(sentences.len(), issues.len());
}

#[test]
fn reports_round_trip_through_json() {
    let report = grammar_report(every_issue(), None);
    let back: FeedbackReport = serde_json::from_str(&report.to_json()).unwrap();
    assert_eq!(back, report);
    assert_eq!(back.channel, Channel::Grammar);
}

#[test]
fn rendering_is_deterministic() {
    let cat = catalog();
    let s = random_scene(&cat, 7);
    let err = PhysicalError::NoFeasiblePlacement {
        object: "cup_4".into(),
        target: "book_0".into(),
        feasible_offsets: 3,
    };
    let a = diagnose_failure(Failure::Physical(&err), &s, &cat, None, 0.01);
    let b = diagnose_failure(Failure::Physical(&err), &s, &cat, None, 0.01);
    assert_eq!(a, b);
    assert_eq!(a.channel, Channel::Failure);
    assert!(a.empty_regions.len() <= 5);
    assert!(a.text.contains("`cup_4` cannot be supported by `book_0`"));
}

#[test]
fn crowded_scene_suggests_free_space() {
    let cat = catalog();
    let mut s = SceneState::new(table());
    place(
        &mut s,
        &cat,
        "monitor_0",
        "monitor",
        Pose::new(-0.3, 0.0, 0.0, 0.0),
    );
    place(
        &mut s,
        &cat,
        "keyboard_0",
        "keyboard",
        Pose::new(0.05, 0.0, 0.0, 0.0),
    );
    place(
        &mut s,
        &cat,
        "laptop_0",
        "laptop",
        Pose::new(0.3, 0.3, 0.0, 0.0),
    );
    place(&mut s, &cat, "cup_0", "cup", Pose::new(0.3, 0.3, 0.0, 0.0));
    let err = PhysicalError::BatchPartiallyPlaced {
        container: "open_box_0".into(),
        placed: vec![],
        failed: vec!["ball_0".into()],
    };
    let report = diagnose_failure(Failure::Physical(&err), &s, &cat, None, 0.01);
    assert!(report.text.contains("empty region"), "{}", report.text);
    assert!(!report.empty_regions.is_empty());
    for r in &report.empty_regions {
        let dir = r
            .direction
            .expect("a scene with objects gives every region a direction");
        assert!(report.text.contains(&format!(
            "{} `{}`",
            dir.phrase(),
            r.nearest.as_ref().unwrap()
        )));
    }
    let m = report.metrics.as_ref().unwrap();
    assert_eq!(m.object_count, 4);
    assert!(m.stability_score.is_none());
}

struct FixedVqa(Result<f64, String>);

impl VqaClient for FixedVqa {
    fn yes_probability(&self, svg: &str, prompt: &str) -> Result<f64, String> {
        assert!(svg.starts_with("<svg"));
        assert_eq!(prompt, "a block");
        self.0.clone()
    }
}

#[test]
fn success_report_for_a_block() {
    let cat = Catalog::from_records([boxed("block", [0.1, 0.1, 0.1])]).unwrap();
    let mut s = SceneState::new(table());
    place(
        &mut s,
        &cat,
        "block_0",
        "block",
        Pose::new(0.0, 0.0, 0.0, 0.0),
    );
    let backend = QuasiStatic::new(0.01);
    let opts = SuccessOptions {
        samples: 8,
        prompt: "a block".into(),
        ..Default::default()
    };

    let report = success_report(&s, &cat, &backend, &opts, Some(&FixedVqa(Ok(0.8)))).unwrap();
    assert_eq!(report.channel, Channel::Success);
    let m = report.metrics.as_ref().unwrap();
    assert_eq!(m.stability_score, Some(1.0));
    assert_eq!(m.external_vqa, Some(VqaOutcome::Score { value: 0.8 }));
    assert!(report.text.contains("Visual match: 0.800"));

    let report = success_report(
        &s,
        &cat,
        &backend,
        &opts,
        Some(&FixedVqa(Err("offline".into()))),
    )
    .unwrap();
    assert_eq!(
        report.metrics.unwrap().external_vqa,
        Some(VqaOutcome::Unavailable {
            reason: "offline".into()
        })
    );

    let report = success_report(&s, &cat, &backend, &opts, None).unwrap();
    assert!(report.text.contains("Visual match: not evaluated"));
}

#[test]
fn empty_scene_is_vacuously_stable() {
    let cat = catalog();
    let s = SceneState::new(table());
    let report = success_report(
        &s,
        &cat,
        &QuasiStatic::new(0.01),
        &SuccessOptions::default(),
        None,
    )
    .unwrap();
    let m = report.metrics.unwrap();
    assert_eq!(m.stability_score, Some(1.0));
    assert_eq!(m.surface_coverage, 0.0);
    assert_eq!(m.compactness, 1.0);
}
