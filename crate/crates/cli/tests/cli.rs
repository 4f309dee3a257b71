use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use roomfit_core::io::{read_point_cloud, write_frame_sequence, DepthFrame, Intrinsics};
use roomfit_core::RigidTransform;

fn roomfit(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_roomfit"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn ok(out: Output) -> Output {
    assert_eq!(code(&out), 0, "stdout: {}\nstderr: {}", stdout(&out), stderr(&out));
    out
}

const SCENE: &str = r#"
noise_sigma = 0.005
point_spacing = 0.04
seed = 5

[room]
dims = [6.0, 5.0, 2.6]

[room.pose]
angle_deg = 25.0
translation = [1.0, -2.0, 0.3]

[[furniture]]
category = "chair"
shape = { kind = "model", id = "chair-000" }
position = [1.5, 1.5]
rotation_deg = 40.0

[[furniture]]
category = "table"
shape = { kind = "model", id = "table-001" }
position = [4.0, 3.0]
rotation_deg = 100.0
scale = [1.2, 1.0, 1.0]

[[furniture]]
category = "sofa"
shape = { kind = "model", id = "sofa-000" }
position = [2.0, 3.8]
"#;

/// Catalog under `cat/models` and a furnished scan under `scene/`.
fn furnished(dir: &Path) {
    ok(roomfit(&["synth", "--catalog", "2", "-o", "cat"], dir));
    std::fs::write(dir.join("spec.toml"), SCENE).unwrap();
    ok(roomfit(&["synth", "--spec", "spec.toml", "--models", "cat/models", "-o", "scene"], dir));
}

const SCAN: [&str; 6] = [
    "--cloud",
    "scene/scene.ply",
    "--labels",
    "scene/scene.labels",
    "--models",
    "cat/models",
];

fn report_dist(path: &Path) -> f64 {
    let text = std::fs::read_to_string(path).unwrap();
    let last = text.lines().last().unwrap();
    let mut words = last.split_whitespace();
    words.find(|w| *w == "Dist").unwrap();
    words.next().unwrap().parse().unwrap()
}

#[test]
fn missing_manifest_exits_2_with_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = roomfit(&["fuse", "--frames", "nowhere/manifest.toml", "-o", "out"], dir.path());
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("nowhere/manifest.toml"), "{}", stderr(&out));
}

#[test]
fn zero_voxel_is_rejected_before_any_work() {
    let dir = tempfile::tempdir().unwrap();
    let out = roomfit(&["fuse", "--frames", "nowhere/manifest.toml", "--voxel", "0", "-o", "out"], dir.path());
    assert_eq!(code(&out), 5, "{}", stderr(&out));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn usage_errors_exit_5() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&roomfit(&["fuse", "--voxel", "abc"], dir.path())), 5);
    assert_eq!(code(&roomfit(&["fuse", "--no-such-flag"], dir.path())), 5);
    assert_eq!(code(&roomfit(&["--help"], dir.path())), 0);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir(dir.path().join("conf")).unwrap();
    std::fs::write(
        dir.path().join("conf/run.toml"),
        "out = \"../fused\"\n[inputs]\nframes = \"../frames/manifest.toml\"\n[tsdf]\nvoxel = 0\n",
    )
    .unwrap();
    let out = roomfit(&["fuse", "-c", "conf/run.toml"], dir.path());
    assert_eq!(code(&out), 5, "{}", stderr(&out));

    ok(roomfit(&["synth", "--frames", "6", "-o", "."], dir.path()));
    ok(roomfit(&["fuse", "-c", "conf/run.toml", "--voxel", "0.05"], dir.path()));
    assert!(dir.path().join("fused/fused.ply").exists());
}

#[test]
fn unknown_config_key_exits_5() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), "[tsdf]\nvoxels = 0.02\n").unwrap();
    let out = roomfit(&["fuse", "-c", "c.toml"], dir.path());
    assert_eq!(code(&out), 5);
}

/// Distance from a point inside the axis-aligned room box to its nearest face.
fn box_distance(p: [f64; 3], dims: [f64; 3]) -> f64 {
    (0..3)
        .map(|k| p[k].abs().min((dims[k] - p[k]).abs()))
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn fused_sequence_lies_on_the_room_surfaces() {
    let dir = tempfile::tempdir().unwrap();
    ok(roomfit(&["synth", "--frames", "20", "-o", "synth"], dir.path()));
    let voxel = 0.04;
    ok(roomfit(
        &["fuse", "--frames", "synth/frames/manifest.toml", "--voxel", "0.04", "-o", "fused"],
        dir.path(),
    ));
    let cloud = read_point_cloud(&dir.path().join("fused/fused.ply")).unwrap();
    assert!(cloud.len() > 1000);
    let worst = cloud
        .points
        .iter()
        .map(|p| box_distance([p.x, p.y, p.z], [4.0, 3.0, 2.5]))
        .fold(0.0, f64::max);
    assert!(worst < 1.5 * voxel, "farthest point {worst} m from the room surfaces");
}

#[test]
fn empty_depth_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let frame = DepthFrame {
        width: 16,
        height: 12,
        depth: vec![0.0; 16 * 12],
        color: None,
        intrinsics: Intrinsics {
            fx: 10.0,
            fy: 10.0,
            cx: 7.5,
            cy: 5.5,
        },
        pose: RigidTransform::identity(),
    };
    let manifest: PathBuf = write_frame_sequence(&[frame.clone(), frame], &dir.path().join("frames"), 5000.0).unwrap();
    let out = roomfit(&["fuse", "--frames", manifest.to_str().unwrap(), "-o", "out"], dir.path());
    assert_eq!(code(&out), 3, "{}", stderr(&out));
}

#[test]
fn losses_on_identical_depth_maps_print_zero() {
    let dir = tempfile::tempdir().unwrap();
    let values: Vec<f32> = (0..48).map(|i| 1.0 + 0.01 * i as f32).collect();
    roomfit_core::io::maps::write_raw_map(&dir.path().join("d.raw"), 8, 6, 1, &values).unwrap();
    let out = ok(roomfit(
        &["losses", "--rendered-depth", "d.raw", "--captured-depth", "d.raw", "-o", "out"],
        dir.path(),
    ));
    let parsed: toml::Table = toml::from_str(&stdout(&out)).unwrap();
    assert_eq!(parsed["depth_loss"].as_float(), Some(0.0));
    assert_eq!(std::fs::read_to_string(dir.path().join("out/losses.toml")).unwrap(), stdout(&out));
}

#[test]
fn losses_need_complete_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let out = roomfit(&["losses", "--rendered-depth", "d.raw"], dir.path());
    assert_eq!(code(&out), 5);
}

#[test]
fn register_is_deterministic_for_a_fixed_seed() {
    let dir = tempfile::tempdir().unwrap();
    furnished(dir.path());
    for out in ["a", "b"] {
        let mut args = vec!["register", "--seed", "11", "-o", out];
        args.extend(SCAN);
        ok(roomfit(&args, dir.path()));
    }
    for name in ["fitted.txt", "baseline.txt", "placements.json", "run.json"] {
        let a = std::fs::read(dir.path().join("a").join(name)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs");
    }
}

#[test]
fn layout_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    furnished(dir.path());
    let inputs: Vec<Vec<u8>> = ["scene/scene.ply", "scene/scene.labels", "cat/models/index.toml"]
        .iter()
        .map(|p| std::fs::read(dir.path().join(p)).unwrap())
        .collect();
    for out in ["a", "b"] {
        let mut args = vec!["layout", "--seed", "42", "--mode", "hybrid", "--keep", "10,12", "-o", out];
        args.extend(SCAN);
        ok(roomfit(&args, dir.path()));
    }
    let a = std::fs::read(dir.path().join("a/layout.json")).unwrap();
    let b = std::fs::read(dir.path().join("b/layout.json")).unwrap();
    assert_eq!(a, b, "layout documents differ");
    assert_eq!(
        std::fs::read(dir.path().join("a/run.json")).unwrap(),
        std::fs::read(dir.path().join("b/run.json")).unwrap()
    );

    let doc = roomfit_core::io::read_layout(&dir.path().join("a/layout.json")).unwrap();
    assert!(doc.residual_violations.is_empty());
    assert_eq!(doc.placements.iter().map(|p| p.instance_id).collect::<Vec<_>>(), vec![10, 12]);
    assert_eq!(doc.pass_through.as_ref().unwrap().instance_ids, vec![11]);
    assert!(dir.path().join("a/pass_through.ply").exists());
    assert!(dir.path().join("a/layout.obj").exists());
    assert!(report_dist(&dir.path().join("a/fitted.txt")) < report_dist(&dir.path().join("a/baseline.txt")));

    let after: Vec<Vec<u8>> = ["scene/scene.ply", "scene/scene.labels", "cat/models/index.toml"]
        .iter()
        .map(|p| std::fs::read(dir.path().join(p)).unwrap())
        .collect();
    assert_eq!(inputs, after, "inputs were modified");
}

#[test]
fn unresolvable_layout_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    ok(roomfit(&["synth", "--catalog", "1", "-o", "cat"], dir.path()));
    let spec = r#"
point_spacing = 0.04
[room]
dims = [2.0, 2.0, 2.4]
[[furniture]]
category = "table"
shape = { kind = "box", size = [1.3, 1.3, 0.7] }
position = [1.0, 1.0]
[[furniture]]
category = "table"
shape = { kind = "box", size = [1.3, 1.3, 0.7] }
position = [1.0, 1.0]
rotation_deg = 10.0
[[furniture]]
category = "sofa"
shape = { kind = "box", size = [1.5, 1.5, 0.8] }
position = [1.0, 1.0]
"#;
    std::fs::write(dir.path().join("crowd.toml"), spec).unwrap();
    ok(roomfit(&["synth", "--spec", "crowd.toml", "-o", "scene"], dir.path()));
    let mut args = vec!["layout", "-o", "out"];
    args.extend(SCAN);
    let out = roomfit(&args, dir.path());
    assert_eq!(code(&out), 4, "{}", stderr(&out));
    let doc = roomfit_core::io::read_layout(&dir.path().join("out/layout.json")).unwrap();
    assert!(!doc.residual_violations.is_empty());
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("out/run.json")).unwrap()).unwrap();
    assert_eq!(manifest["exit_code"], 4);
}

#[test]
fn run_manifest_records_inputs_and_outputs() {
    let dir = tempfile::tempdir().unwrap();
    furnished(dir.path());
    let mut args = vec!["envelope", "-o", "env"];
    args.extend(&SCAN[..4]);
    ok(roomfit(&args, dir.path()));
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("env/run.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "envelope");
    assert_eq!(manifest["versions"]["roomfit"], roomfit_core::VERSION);
    for input in ["cloud", "labels"] {
        assert_eq!(manifest["inputs"][input]["sha256"].as_str().unwrap().len(), 64);
    }
    for output in ["envelope.json", "contour.txt"] {
        assert!(manifest["outputs"][output].is_string(), "{output} not recorded");
    }
    let envelope: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("env/envelope.json")).unwrap()).unwrap();
    let area = envelope["area"].as_f64().unwrap();
    assert!((area - 30.0).abs() < 0.03 * 30.0, "area {area}");
}
