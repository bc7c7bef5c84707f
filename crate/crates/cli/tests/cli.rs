mod common;

use std::fs;

use common::*;
use nalgebra::Vector3;
use surfreg::io::ply::{read_ply_cloud, write_ply_cloud_file};
use surfreg::simulator::{generate_trace_scenario, TraceSpec};
use surfreg::{FrameId, PointCloud};
use tempfile::tempdir;

fn simulate_into(name: &str, dir: &std::path::Path) -> std::path::PathBuf {
    let out = dir.join(name);
    run_ok(&["simulate", s(&scenario(name)), "--out", s(&out)]);
    out
}

#[test]
fn prepare_model_cube_points_lie_on_the_surface() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("cube.ply");
    run_ok(&["prepare-model", s(&fixture("cube.obj")), "--out", s(&out)]);
    let cloud = read_ply_cloud(&out, FrameId::World).unwrap();
    assert_eq!(cloud.len(), 5000);
    assert_eq!(cloud.frame(), FrameId::ModelCt);
    // Voxel centroids near edges sit inside the cube, but never farther from
    // the surface than half a voxel diagonal.
    let bound = 1.25 * 3f64.sqrt() / 2.0;
    for p in cloud.points() {
        assert!(p.amax() <= 50.0 + 1e-3 && p.amax() >= 50.0 - bound, "{p:?} is off the cube");
    }
    let on_face = cloud.points().iter().filter(|p| (p.amax() - 50.0).abs() < 1e-3).count();
    assert!(on_face > 4000, "{on_face}");
    let manifest = dir.path().join("cube.manifest.json");
    assert_schema(&manifest, "manifest.schema.json");
    assert_eq!(read_json(&manifest)["seeds"]["sampling"], 0);
}

#[test]
fn prepare_model_small_count() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("tiny.ply");
    run_ok(&["prepare-model", s(&fixture("cube.obj")), "--points", "10", "--seed", "3", "--out", s(&out)]);
    assert_eq!(read_ply_cloud(&out, FrameId::World).unwrap().len(), 10);
}

#[test]
fn prepare_model_exit_codes() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("x.ply");
    let missing = run(&["prepare-model", "/nonexistent/mesh.obj", "--out", s(&out)]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("no such file"));
    let bad = run(&["prepare-model", s(&fixture("cube.obj")), "--points", "2", "--out", s(&out)]);
    assert_eq!(bad.status.code(), Some(3));
    let unknown_flag = run(&["prepare-model", "--bogus"]);
    assert_eq!(unknown_flag.status.code(), Some(2));
}

#[test]
fn simulate_is_reproducible_and_records_seeds() {
    let dir = tempdir().unwrap();
    let a = simulate_into("foot", &dir.path().join("a"));
    let b = simulate_into("foot", &dir.path().join("b"));
    for name in ["scene.ply", "model.ply", "stylus.csv", "init_pose.txt", "world_from_sensor.txt", "ground_truth.txt"] {
        assert!(a.join(name).is_file(), "{name} missing");
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name} differs");
    }
    let manifest = read_json(&a.join("manifest.json"));
    assert_schema(&a.join("manifest.json"), "manifest.schema.json");
    for seed in ["scenario", "render", "perturb", "stylus", "model_sampling"] {
        assert!(manifest["seeds"][seed].is_u64(), "seed {seed} not recorded");
    }
    assert_eq!(manifest["seeds"]["scenario"], 7);
    let other = read_json(&b.join("manifest.json"));
    assert_eq!(manifest["outputs"]["scene"]["sha256"], other["outputs"]["scene"]["sha256"]);
}

#[test]
fn simulate_rejects_malformed_spec() {
    let dir = tempdir().unwrap();
    let out = run(&["simulate", s(&fixture("malformed.toml")), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn register_recovers_simulated_pose() {
    let dir = tempdir().unwrap();
    let sim = simulate_into("foot", dir.path());
    let out = dir.path().join("result.json");
    let run = run_ok(&[
        "--verbose",
        "register",
        "--scene",
        s(&sim.join("scene.ply")),
        "--model",
        s(&sim.join("model.ply")),
        "--init-pose",
        s(&sim.join("init_pose.txt")),
        "--world-from-sensor",
        s(&sim.join("world_from_sensor.txt")),
        "--stylus",
        s(&sim.join("stylus.csv")),
        "--truth",
        s(&sim.join("ground_truth.txt")),
        "--out",
        s(&out),
    ]);
    assert_schema(&out, "registration.schema.json");
    assert_schema(&dir.path().join("result.manifest.json"), "manifest.schema.json");
    let result = read_json(&out);
    assert_eq!(result["bias"]["status"], "applied");
    let err = &result["pose_error"];
    assert!(err["rotation_deg"].as_f64().unwrap() < 3.0, "{err}");
    assert!(err["translation_mm"].as_f64().unwrap() < 5.0, "{err}");
    assert!(result.get("timings").is_none());

    // The verbose log carries the kept ICP objective trajectory.
    let log = String::from_utf8_lossy(&run.stderr);
    let objectives: Vec<f64> = log
        .lines()
        .filter(|l| l.starts_with("icp: iteration"))
        .map(|l| l.split("objective ").nth(1).unwrap().split(' ').next().unwrap().parse().unwrap())
        .collect();
    assert!(!objectives.is_empty(), "{log}");
    assert!(objectives.windows(2).all(|w| w[1] <= w[0] + 1e-9));
}

#[test]
fn register_skip_bias_and_coarse_only() {
    let dir = tempdir().unwrap();
    let sim = simulate_into("head", dir.path());
    let out = dir.path().join("coarse.json");
    let init = fs::read_to_string(sim.join("init_pose.txt")).unwrap().split_whitespace().collect::<Vec<_>>().join(",");
    run_ok(&[
        "register",
        "--scene",
        s(&sim.join("scene.ply")),
        "--model",
        s(&sim.join("model.ply")),
        "--init-pose",
        &init,
        "--world-from-sensor",
        s(&sim.join("world_from_sensor.txt")),
        "--skip-bias",
        "--coarse-only",
        "--out",
        s(&out),
    ]);
    assert_schema(&out, "registration.schema.json");
    let result = read_json(&out);
    assert_eq!(result["bias"]["status"], "skipped");
    assert!(result.get("final_pose").is_none());
    assert!(result.get("icp").is_none());
    assert!(result["coarse_pose"]["matrix"].is_array());
}

#[test]
fn register_failure_exit_code() {
    let dir = tempdir().unwrap();
    let sim = simulate_into("ear", dir.path());
    // An ROI far from the captured surface leaves nothing to align.
    let out = dir.path().join("r.json");
    let failed = run(&[
        "register",
        "--scene",
        s(&sim.join("scene.ply")),
        "--model",
        s(&sim.join("model.ply")),
        "--init-pose",
        s(&sim.join("init_pose.txt")),
        "--world-from-sensor",
        s(&sim.join("world_from_sensor.txt")),
        "--roi-center",
        "5000,5000,5000",
        "--out",
        s(&out),
    ]);
    assert_eq!(failed.status.code(), Some(4), "{}", String::from_utf8_lossy(&failed.stderr));
    let bad_pose = run(&[
        "register",
        "--scene",
        s(&sim.join("scene.ply")),
        "--model",
        s(&sim.join("model.ply")),
        "--init-pose",
        "1,2,3",
        "--out",
        s(&out),
    ]);
    assert_eq!(bad_pose.status.code(), Some(2));
}

fn write_cloud(path: &std::path::Path, points: Vec<Vector3<f64>>) {
    write_ply_cloud_file(&PointCloud::new(points, FrameId::World).unwrap(), path).unwrap();
}

fn grid(n: usize, offset: f64) -> Vec<Vector3<f64>> {
    (0..n * n)
        .map(|k| Vector3::new((k % n) as f64 * 2.0, (k / n) as f64 * 2.0, offset + 0.01 * (k % 7) as f64))
        .collect()
}

#[test]
fn evaluate_identical_clouds_gives_zero_row() {
    let dir = tempdir().unwrap();
    let cloud = dir.path().join("same.ply");
    write_cloud(&cloud, grid(20, 0.0));
    let csv = dir.path().join("table.csv");
    let json = dir.path().join("table.json");
    run_ok(&[
        "evaluate",
        "--traced",
        s(&cloud),
        "--reference",
        s(&cloud),
        "--trial",
        "same",
        "--csv",
        s(&csv),
        "--json",
        s(&json),
    ]);
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().nth(1).unwrap(), "same,400,0.00,0.00,0.00±0.00,0.00,0.00,0.00,100.00%,0.00");
    assert_schema(&json, "metrics.schema.json");
    assert_schema(&dir.path().join("table.manifest.json"), "manifest.schema.json");
}

#[test]
fn evaluate_three_pools_and_compare() {
    let dir = tempdir().unwrap();
    let traced = dir.path().join("traced.csv");
    let mut text = String::from("x,y,z\n");
    for p in grid(30, 1.5) {
        text.push_str(&format!("{},{},{}\n", p.x, p.y + 0.3 * (p.x * 0.7).sin(), p.z));
    }
    fs::write(&traced, text).unwrap();
    let reference = dir.path().join("reference.ply");
    write_cloud(&reference, grid(30, 0.0));
    let csv = dir.path().join("pools.csv");
    run_ok(&[
        "evaluate",
        "--traced",
        s(&traced),
        "--reference",
        s(&reference),
        "--pools",
        "3",
        "--seed",
        "5",
        "--csv",
        s(&csv),
    ]);
    let text = fs::read_to_string(&csv).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0], "traced");
    assert_eq!(row[1], "900");
    assert!(row[6].contains('–'), "Chamfer range expected: {text}");

    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    fs::write(&a, (0..700).map(|i| format!("{}\n", 3.0 + (i as f64 * 0.37).sin())).collect::<String>()).unwrap();
    fs::write(&b, (0..700).map(|i| format!("{}\n", 4.1 + (i as f64 * 0.53).cos())).collect::<String>()).unwrap();
    let json = dir.path().join("perm.json");
    run_ok(&["evaluate", "--compare", s(&a), s(&b), "--permutations", "2000", "--json", s(&json)]);
    assert_schema(&json, "permutation.schema.json");
    let result = read_json(&json);
    assert_eq!(result["n_per_group"], 600);
    assert!(result["p_value"].as_f64().unwrap() < 0.001);

    let short = run(&["evaluate", "--compare", s(&a), s(&b), "--n-sub", "900", "--json", s(&json)]);
    assert_eq!(short.status.code(), Some(3));
}

#[test]
fn trace_eval_identical_and_mismatched_counts() {
    let dir = tempdir().unwrap();
    let surface = dir.path().join("surface.ply");
    let internal = dir.path().join("internal.ply");
    write_cloud(&surface, grid(25, 0.0));
    write_cloud(&internal, grid(25, -15.0));
    let out = dir.path().join("same.json");
    run_ok(&[
        "trace-eval",
        "--ar-surface",
        s(&surface),
        "--ar-internal",
        s(&internal),
        "--ct-surface",
        s(&surface),
        "--ct-internal",
        s(&internal),
        "--out",
        s(&out),
    ]);
    assert_schema(&out, "trace_eval.schema.json");
    let summary = &read_json(&out)["summary"];
    assert_eq!(summary["median_mm"], 0.0);
    assert_eq!(summary["rmse_mm"], 0.0);

    let scenario = generate_trace_scenario(&TraceSpec::default()).unwrap();
    let paths: Vec<_> = ["ar_s", "ar_i", "ct_s", "ct_i"].iter().map(|n| dir.path().join(format!("{n}.ply"))).collect();
    for (path, cloud) in
        paths.iter().zip([&scenario.ar_surface, &scenario.ar_internal, &scenario.ct_surface, &scenario.ct_internal])
    {
        write_ply_cloud_file(cloud, path).unwrap();
    }
    assert_ne!(scenario.ar_surface.len(), scenario.ct_surface.len());
    let out = dir.path().join("synthetic.json");
    run_ok(&[
        "trace-eval",
        "--ar-surface",
        s(&paths[0]),
        "--ar-internal",
        s(&paths[1]),
        "--ct-surface",
        s(&paths[2]),
        "--ct-internal",
        s(&paths[3]),
        "--out",
        s(&out),
    ]);
    let summary = &read_json(&out)["summary"];
    assert_eq!(summary["n"], scenario.ar_surface.len());
    assert!(summary["median_mm"].as_f64().unwrap() < 1.0);
}
