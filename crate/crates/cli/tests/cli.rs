use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const DESK: &str = r#"[
    ["laptop_0", "a slim silver laptop computer"],
    ["laptop_0", "PLACE-ON-BASE", "root", {"x": 0.0, "y": 0.05}],
    ["laptop_0", "FACING-FRONT", "root", {}],
    ["cup_0", "a ceramic cup mug"],
    ["cup_0", "PLACE-ON-BASE", "root", {}],
    ["cup_0", "RIGHT-OF", "laptop_0", {"distance": 0.1}],
    ["cup_0", "ALIGN-CENTER-FB", "laptop_0", {}],
    ["cup_0", "FACING-FRONT", "root", {}],
    ["book_0", "a hardcover book"],
    ["book_0", "PLACE-ON-BASE", "root", {}],
    ["book_0", "FACING-LEFT", "root", {}],
    ["book_0", "LEFT-OF", "laptop_0", {"distance": 0.05}],
    ["book_0", "ALIGN-FRONT", "laptop_0", {}]
]"#;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_tabletop"));
    c.env_remove("OPENAI_API_KEY");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}",
            String::from_utf8_lossy(&out.stdout)
        )
    })
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn solve_desk(dir: &Path, out_name: &str) -> PathBuf {
    let prog = write(dir, "desk.json", DESK);
    let out = dir.join(out_name);
    let o = run(&["solve", s(&prog), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    out
}

#[test]
fn validate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = write(dir.path(), "good.json", DESK);
    let o = run(&["validate", s(&good)]);
    assert_eq!(code(&o), 0);
    let report = stdout_json(&o);
    assert_eq!(report["channel"], "grammar");
    assert_eq!(report["issues"].as_array().unwrap().len(), 0);

    let on_root = write(
        dir.path(),
        "root.json",
        r#"[["cup_0", "a cup"], ["cup_0", "PLACE-ON", "root", {}], ["cup_0", "FACING-FRONT", "root", {}]]"#,
    );
    let o = run(&["validate", s(&on_root)]);
    assert_eq!(code(&o), 1);
    assert!(!stdout_json(&o)["issues"].as_array().unwrap().is_empty());

    let garbage = write(dir.path(), "garbage.txt", "place a cup somewhere");
    assert_eq!(code(&run(&["validate", s(&garbage)])), 2);

    assert_eq!(code(&run(&["validate", "/nonexistent/program.json"])), 2);
}

#[test]
fn agent_style_program_validates() {
    // Entries separated by newlines only and wrapped in a code fence, as in
    // the example the agent is shown.
    let dir = tempfile::tempdir().unwrap();
    let prog = write(
        dir.path(),
        "listing.txt",
        r#"```
[
    ["laptop_0", "a slim silver laptop with a minimalist design"]
    ["laptop_0", "PLACE-ON-BASE", "root", {"x": 0.0, "y": 0.0}],
    ["laptop_0", "FACING-SAME-AS", "root", {}],

    ["notebook_0", "a medium-sized notebook with lined pages"]
    ["notebook_0", "PLACE-ON-BASE", "root", {}],
    ["notebook_0", "FRONT-OF", "laptop_0", {"distance": 0.1}],
    ["notebook_0", "ALIGN-CENTER-LR", "laptop_0", {}],
    ["notebook_0", "RANDOM-ROT", "root", {}],

    ["cup_0", "an empty ceramic cup with a handle"]
    ["cup_0", "PLACE-ON", "notebook_0", {"overlap": 1.0}]
    ["cup_0", "FACING-FRONT", "root", {}]
]
```"#,
    );
    let o = run(&["validate", s(&prog)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let scene = dir.path().join("scene.json");
    let o = run(&["solve", s(&prog), "--out", s(&scene)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn solve_is_deterministic_and_settled() {
    let dir = tempfile::tempdir().unwrap();
    let a = solve_desk(dir.path(), "a.json");
    let b = solve_desk(dir.path(), "b.json");
    let (ta, tb) = (
        std::fs::read_to_string(&a).unwrap(),
        std::fs::read_to_string(&b).unwrap(),
    );
    assert_eq!(ta, tb);

    let scene: Value = serde_json::from_str(&ta).unwrap();
    let objects = scene["objects"].as_array().unwrap();
    assert_eq!(objects.len(), 3);
    for o in objects {
        // Everything rests on the table top.
        assert!(o["position"][2].as_f64().unwrap().abs() < 1e-6, "{o}");
    }
    // Each object is stable under the solved scene.
    for id in ["laptop_0", "cup_0", "book_0"] {
        let o = run(&["stability", s(&a), id, "--samples", "10"]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn crowded_table_reports_penetrations() {
    let dir = tempfile::tempdir().unwrap();
    let mut entries = Vec::new();
    // Fourteen laptops cover more than the whole table.
    for i in 0..14 {
        entries.push(format!(r#"["laptop_{i}", "a laptop"]"#));
        entries.push(format!(
            r#"["laptop_{i}", "PLACE-ON-BASE", "root", {{"x": 0.0, "y": 0.0}}]"#
        ));
        entries.push(format!(r#"["laptop_{i}", "FACING-FRONT", "root", {{}}]"#));
    }
    let prog = write(
        dir.path(),
        "crowd.json",
        &format!("[{}]", entries.join(",\n")),
    );
    let out = dir.path().join("crowd_scene.json");
    let report_path = dir.path().join("report.json");
    let o = run(&[
        "solve",
        s(&prog),
        "--out",
        s(&out),
        "--report",
        s(&report_path),
    ]);
    assert_eq!(code(&o), 1);
    assert!(!out.exists());
    let report = stdout_json(&o);
    assert_eq!(report["channel"], "failure");
    let kinds: Vec<&str> = report["issues"]
        .as_array()
        .unwrap()
        .iter()
        .map(|i| i["kind"].as_str().unwrap())
        .collect();
    assert!(kinds.contains(&"penetration"), "{kinds:?}");
    let saved: Value =
        serde_json::from_str(&std::fs::read_to_string(report_path).unwrap()).unwrap();
    assert_eq!(saved, report);
}

#[test]
fn syntax_errors_exit_two_on_solve() {
    let dir = tempfile::tempdir().unwrap();
    let prog = write(dir.path(), "bad.json", "[[\"a_0\", ");
    let o = run(&["solve", s(&prog), "--out", s(&dir.path().join("x.json"))]);
    assert_eq!(code(&o), 2);
}

#[test]
fn lone_block_is_robust() {
    let dir = tempfile::tempdir().unwrap();
    let prog = write(
        dir.path(),
        "cube.json",
        r#"[["cube_0", "a small cube block"], ["cube_0", "PLACE-ON-BASE", "root", {"x": 0.0, "y": 0.0}], ["cube_0", "FACING-FRONT", "root", {}]]"#,
    );
    let scene = dir.path().join("cube_scene.json");
    assert_eq!(code(&run(&["solve", s(&prog), "--out", s(&scene)])), 0);
    let o = run(&[
        "stability",
        s(&scene),
        "cube_0",
        "--samples",
        "40",
        "--seed",
        "3",
    ]);
    assert_eq!(code(&o), 0);
    let est = stdout_json(&o);
    assert!(est["p_fail"].as_f64().unwrap() < 0.1, "{est}");
    assert_eq!(est["sample_count"], 40);
}

#[test]
fn stability_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let scene = solve_desk(dir.path(), "scene.json");
    assert_eq!(
        code(&run(&["stability", s(&scene), "cup_0", "--samples", "0"])),
        2
    );
    assert_eq!(code(&run(&["stability", s(&scene), "ghost_0"])), 2);
    assert_eq!(
        code(&run(&["stability", s(&scene), "cup_0", "--theta", "1,2,3"])),
        2
    );
}

#[test]
fn stability_optimization_writes_a_scene() {
    let dir = tempfile::tempdir().unwrap();
    let scene = solve_desk(dir.path(), "scene.json");
    let out = dir.path().join("perturbed.json");
    let o = run(&[
        "stability",
        s(&scene),
        "cup_0",
        "--samples",
        "12",
        "--optimize",
        "2",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = stdout_json(&o);
    assert!(r["final_p_fail"].as_f64().unwrap() >= 0.0);
    assert_eq!(r["center"].as_array().unwrap().len(), 11);
    assert!(out.exists());
}

fn count(svg: &str, needle: &str) -> usize {
    svg.matches(needle).count()
}

#[test]
fn render_empty_and_populated_scenes() {
    let dir = tempfile::tempdir().unwrap();
    let empty = write(
        dir.path(),
        "empty.json",
        r#"{"version": 1, "bounds": {"min_x": -0.5, "max_x": 0.5, "min_y": -0.5, "max_y": 0.5, "top_z": 0.0}, "objects": [],
            "provenance": {"program_hash": "", "seed": 0, "solver_config": null}}"#,
    );
    let svg_path = dir.path().join("empty.svg");
    let o = run(&["render", s(&empty), "--out", s(&svg_path)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let svg = std::fs::read_to_string(&svg_path).unwrap();
    assert_eq!(count(&svg, "<rect"), 1);
    assert_eq!(count(&svg, "<polygon"), 0);
    assert_eq!(count(&svg, "<text"), 0);

    let scene = solve_desk(dir.path(), "desk_scene.json");
    let svg_path = dir.path().join("desk.svg");
    assert_eq!(code(&run(&["render", s(&scene), "--out", s(&svg_path)])), 0);
    let svg = std::fs::read_to_string(&svg_path).unwrap();
    assert_eq!(count(&svg, "<polygon"), 3);
    assert_eq!(count(&svg, "<text"), 3);
    for id in ["laptop_0", "cup_0", "book_0"] {
        assert!(svg.contains(&format!(">{id}</text>")));
    }

    let golden = include_str!("golden/desk.svg");
    assert_eq!(svg, golden, "rendering of the desk scene changed");
}

#[test]
fn generate_offline_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let prog = write(dir.path(), "desk.json", DESK);
    let (scene_a, log_a) = (dir.path().join("a.json"), dir.path().join("a.jsonl"));
    let o = run(&[
        "generate",
        "a small desk",
        "--offline",
        "--program",
        s(&prog),
        "--out",
        s(&scene_a),
        "--transcript",
        s(&log_a),
        "--stability-samples",
        "5",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let (scene_b, log_b) = (dir.path().join("b.json"), dir.path().join("b.jsonl"));
    let o = run(&[
        "generate",
        "ignored",
        "--replay",
        s(&log_a),
        "--out",
        s(&scene_b),
        "--transcript",
        s(&log_b),
        "--stability-samples",
        "5",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        std::fs::read(&scene_a).unwrap(),
        std::fs::read(&scene_b).unwrap()
    );
    assert_eq!(
        std::fs::read(&log_a).unwrap(),
        std::fs::read(&log_b).unwrap()
    );
}

#[test]
fn generate_scripted_recovers_from_a_bad_reply() {
    let dir = tempfile::tempdir().unwrap();
    let replies = serde_json::to_string(&["Sure! Here is a scene.", DESK]).unwrap();
    let script = write(dir.path(), "replies.json", &replies);
    let (scene, log) = (dir.path().join("scene.json"), dir.path().join("log.jsonl"));
    let o = run(&[
        "generate",
        "a small desk",
        "--script",
        s(&script),
        "--enrich",
        "0",
        "--out",
        s(&scene),
        "--transcript",
        s(&log),
        "--stability-samples",
        "5",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rounds = std::fs::read_to_string(&log)
        .unwrap()
        .lines()
        .filter(|l| l.contains(r#""kind":"round""#))
        .count();
    assert_eq!(rounds, 2);
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&scene).unwrap()).unwrap();
    assert_eq!(v["objects"].as_array().unwrap().len(), 3);
}

#[test]
fn generate_exhausted_retries_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let script = write(dir.path(), "replies.json", r#"["no", "still no", "nope"]"#);
    let o = run(&[
        "generate",
        "a desk",
        "--script",
        s(&script),
        "--max-retries",
        "2",
        "--out",
        s(&dir.path().join("s.json")),
    ]);
    assert_eq!(code(&o), 1);
    assert_eq!(stdout_json(&o)["channel"], "grammar");
}

#[test]
fn generate_without_api_key_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["generate", "a desk", "--out", s(&dir.path().join("s.json"))]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("OPENAI_API_KEY"));
}

#[test]
fn bad_bounds_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let prog = write(dir.path(), "desk.json", DESK);
    let out = dir.path().join("x.json");
    assert_eq!(
        code(&run(&[
            "solve",
            s(&prog),
            "--out",
            s(&out),
            "--bounds",
            "0.5,-0.5,-0.5,0.5,0"
        ])),
        2
    );
    assert_eq!(
        code(&run(&[
            "solve",
            s(&prog),
            "--out",
            s(&out),
            "--bounds",
            "1,2,3"
        ])),
        2
    );
}
