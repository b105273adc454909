#![allow(dead_code)]

use rand::Rng;
use tabletop::catalog::{AssetRecord, Catalog};
use tabletop::scene::{PlacedObject, SceneState};
use tabletop::shape::Primitive;
use tabletop::spatial::{Bounds2D, Pose};

pub fn table() -> Bounds2D {
    Bounds2D::new(-0.5, 0.5, -0.5, 0.5, 0.0).unwrap()
}

pub fn boxed(id: &str, size: [f64; 3]) -> AssetRecord {
    AssetRecord::primitive(id, Primitive::Box { size })
}

/// Small tabletop catalog shared by the integration tests.
pub fn catalog() -> Catalog {
    Catalog::from_records([
        boxed("book", [0.2, 0.15, 0.03])
            .with_description("book")
            .with_mass(0.5, 0.7),
        boxed("notebook", [0.24, 0.18, 0.02])
            .with_description("notebook")
            .with_mass(0.3, 0.4),
        boxed("laptop", [0.32, 0.22, 0.02])
            .with_description("laptop computer")
            .with_mass(1.5, 2.0),
        boxed("keyboard", [0.15, 0.44, 0.03]).with_description("keyboard"),
        boxed("monitor", [0.2, 0.5, 0.4])
            .with_description("monitor")
            .with_supporting_probability(0.0),
        boxed("cube", [0.05, 0.05, 0.05])
            .with_description("cube block")
            .with_mass(0.1, 0.1),
        boxed("plate", [0.22, 0.22, 0.02]).with_description("plate"),
        AssetRecord::primitive(
            "cup",
            Primitive::Cylinder {
                radius: 0.04,
                height: 0.1,
            },
        )
        .with_description("cup mug")
        .with_mass(0.2, 0.3)
        .with_supporting_probability(0.0),
        AssetRecord::primitive(
            "vase",
            Primitive::Cylinder {
                radius: 0.05,
                height: 0.25,
            },
        )
        .with_description("vase")
        .with_supporting_probability(0.0),
        AssetRecord::primitive(
            "pen",
            Primitive::Cylinder {
                radius: 0.006,
                height: 0.14,
            },
        )
        .with_description("pen")
        .with_mass(0.01, 0.02)
        .with_supporting_probability(0.0),
        AssetRecord::primitive(
            "pencil",
            Primitive::Cylinder {
                radius: 0.006,
                height: 0.17,
            },
        )
        .with_description("pencil")
        .with_mass(0.01, 0.02)
        .with_supporting_probability(0.0),
        AssetRecord::primitive(
            "pen_holder",
            Primitive::Tube {
                radius: 0.045,
                height: 0.1,
                wall: 0.01,
            },
        )
        .with_description("pen holder")
        .with_supporting_probability(0.0),
        AssetRecord::primitive(
            "open_box",
            Primitive::OpenBox {
                size: [0.3, 0.3, 0.12],
                wall: 0.01,
            },
        )
        .with_description("open box"),
        AssetRecord::primitive("ball", Primitive::Sphere { radius: 0.06 })
            .with_description("ball")
            .with_supporting_probability(0.0),
        AssetRecord::primitive(
            "fork",
            Primitive::Box {
                size: [0.02, 0.18, 0.01],
            },
        )
        .with_description("fork"),
        AssetRecord::primitive(
            "knife",
            Primitive::Box {
                size: [0.02, 0.2, 0.01],
            },
        )
        .with_description("knife"),
        AssetRecord::primitive(
            "chair",
            Primitive::Box {
                size: [0.4, 0.4, 0.45],
            },
        )
        .with_description("chair"),
        AssetRecord::primitive(
            "lamp",
            Primitive::Cylinder {
                radius: 0.07,
                height: 0.35,
            },
        )
        .with_description("lamp")
        .with_supporting_probability(0.0),
    ])
    .unwrap()
}

pub fn place(scene: &mut SceneState, catalog: &Catalog, id: &str, asset: &str, pose: Pose) {
    scene
        .push(PlacedObject::nominal(id, catalog.get(asset).unwrap(), pose))
        .unwrap();
}

/// Random spatial program over [`catalog`]: the first object gets an absolute
/// position, every later one is placed and centred relative to an earlier one.
pub fn random_spatial_program(rng: &mut impl Rng) -> String {
    let assets = ["book", "notebook", "plate", "cube", "laptop", "keyboard"];
    let rels = ["LEFT-OF", "RIGHT-OF", "FRONT-OF", "BACK-OF"];
    let n = rng.random_range(3..7);
    let mut e = Vec::new();
    let mut ids: Vec<String> = Vec::new();
    for i in 0..n {
        let asset = assets[rng.random_range(0..assets.len())];
        let id = format!("{asset}_{i}");
        e.push(format!(r#"["{id}", "{asset}"]"#));
        let rot = if rng.random_bool(0.5) {
            "RANDOM-ROT"
        } else {
            "FACING-FRONT"
        };
        if i == 0 {
            e.push(format!(
                r#"["{id}", "PLACE-ON-BASE", "root", {{"x": {:.3}, "y": {:.3}}}]"#,
                rng.random_range(-0.3..0.3),
                rng.random_range(-0.3..0.3)
            ));
            e.push(format!(r#"["{id}", "{rot}", "root", {{}}]"#));
        } else {
            let prev = &ids[rng.random_range(0..ids.len())];
            e.push(format!(r#"["{id}", "PLACE-ON-BASE", "root", {{}}]"#));
            e.push(format!(r#"["{id}", "{rot}", "root", {{}}]"#));
            let rel = rels[rng.random_range(0..4)];
            e.push(format!(
                r#"["{id}", "{rel}", "{prev}", {{"distance": {:.3}}}]"#,
                rng.random_range(-0.1..0.2)
            ));
            let align = if rel == "LEFT-OF" || rel == "RIGHT-OF" {
                "ALIGN-CENTER-FB"
            } else {
                "ALIGN-CENTER-LR"
            };
            e.push(format!(r#"["{id}", "{align}", "{prev}", {{}}]"#));
        }
        ids.push(id);
    }
    format!("[{}]", e.join(",\n"))
}
