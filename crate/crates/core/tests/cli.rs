mod support;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mapprior::change_diff::{write_map_version, MapVersion};
use mapprior::map_model::{write_scenes, BoundingBox, ControlPoint, FeatureClass, InvarianceClass, MapFeature, MapFrame};
use serde_json::Value;
use support::*;
use tempfile::TempDir;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mapprior")).args(args).output().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn line(y: f64, x0: f64, x1: f64, n: usize) -> Vec<ControlPoint<f64>> {
    (0..n).map(|k| ControlPoint::new(x0 + (x1 - x0) * k as f64 / (n - 1) as f64, y)).collect()
}

fn scene(id: &str, shift: f64) -> MapFrame<f64> {
    let f = |class, inv, pts: Vec<ControlPoint<f64>>| {
        MapFeature::new(class, inv, pts.iter().map(|q| q.translate(0.0, shift)).collect())
    };
    MapFrame::new(
        id,
        vec![
            f(FeatureClass::LaneDivider, InvarianceClass::UndirectedPolyline, line(0.0, -30.0, 30.0, 20)),
            f(FeatureClass::LaneDivider, InvarianceClass::UndirectedPolyline, line(-12.0, -30.0, 30.0, 20)),
            f(FeatureClass::RoadBoundary, InvarianceClass::UndirectedPolyline, line(20.0, -40.0, 40.0, 20)),
            f(FeatureClass::LaneCenter, InvarianceClass::DirectedPolyline, line(-30.0, -35.0, 35.0, 20)),
        ],
    )
}

fn write_frames(path: &Path, frames: &[MapFrame<f64>]) {
    let mut buf = Vec::new();
    write_scenes(&mut buf, frames).unwrap();
    fs::write(path, buf).unwrap();
}

fn fixture(dir: &TempDir, name: &str, frames: &[MapFrame<f64>]) -> PathBuf {
    let path = dir.path().join(name);
    write_frames(&path, frames);
    path
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

#[test]
fn perturb_empty_input_succeeds() {
    let dir = TempDir::new().unwrap();
    let input = fixture(&dir, "empty.jsonl", &[]);
    let out = dir.path().join("out.jsonl");
    let o = bin(&["perturb", "--scenes", p(&input), "--out", p(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(fs::read(&out).unwrap().is_empty());
    let manifest = json(&dir.path().join("out.jsonl.manifest.json"));
    assert_eq!(manifest["command"], "perturb");
    assert_eq!(manifest["inputs"].as_object().unwrap().len(), 1);
}

#[test]
fn perturb_is_deterministic_across_runs_and_jobs() {
    let dir = TempDir::new().unwrap();
    let frames: Vec<_> = (0..40).map(|i| scene(&format!("f{i:02}"), 0.0)).collect();
    let input = fixture(&dir, "in.jsonl", &frames);
    let recipe = dir.path().join("recipe.json");
    fs::write(
        &recipe,
        r#"{"master_seed": 7, "mutations": [
            {"kind": "drop_features", "p": 0.1},
            {"kind": "duplicate_features", "p": 0.1},
            {"kind": "wrong_class", "p": 0.1},
            {"kind": "jitter_control_points", "sigma": 0.1},
            {"kind": "shift_features", "sigma": 0.1},
            {"kind": "localization_noise", "sigma": 0.1, "sigma_yaw_deg": 0.1},
            {"kind": "perlin_warp", "sigma": 1.0}]}"#,
    )
    .unwrap();
    let mut outputs = Vec::new();
    for (k, jobs) in ["1", "8", "8", "1"].iter().enumerate() {
        let out = dir.path().join(format!("out{k}.jsonl"));
        let o = bin(&["--jobs", jobs, "perturb", "--scenes", p(&input), "--recipe", p(&recipe), "--out", p(&out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push(fs::read(&out).unwrap());
    }
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));
    assert_ne!(outputs[0], fs::read(&input).unwrap());
    // The seed flag overrides the recipe and changes the output.
    let out = dir.path().join("seeded.jsonl");
    assert!(bin(&["perturb", "--scenes", p(&input), "--recipe", p(&recipe), "--seed", "8", "--out", p(&out)])
        .status
        .success());
    assert_ne!(fs::read(&out).unwrap(), outputs[0]);
    let m0 = json(&dir.path().join("out0.jsonl.manifest.json"));
    let m1 = json(&dir.path().join("out1.jsonl.manifest.json"));
    assert_eq!(m0["config_hash"], m1["config_hash"]);
    assert_eq!(m0["master_seed"], 7);
}

#[test]
fn corrupt_record_names_its_line() {
    let dir = TempDir::new().unwrap();
    let frames: Vec<_> = (0..6).map(|i| scene(&format!("f{i}"), 0.0)).collect();
    let input = fixture(&dir, "in.jsonl", &frames);
    let mut text = fs::read_to_string(&input).unwrap();
    text.push_str("{\"frame_id\": \"bad\", \"ego_pose\": {\"x\": 0, \"y\": 0, \"yaw\": 0}, \"features\": [{\"class\": \"lane_divider\", \"invariance\": \"undirected_polyline\", \"confidence\": 1, \"points\": [[0, \"x\"]]}]}\n");
    fs::write(&input, text).unwrap();
    let o = bin(&["perturb", "--scenes", p(&input), "--out", p(&dir.path().join("o.jsonl"))]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 7") && err.contains("features[0].points"), "{err}");
}

#[test]
fn loss_of_identical_files_is_zero() {
    let dir = TempDir::new().unwrap();
    let frames: Vec<_> = (0..3).map(|i| scene(&format!("f{i}"), 0.0)).collect();
    let a = fixture(&dir, "a.jsonl", &frames);
    let out = dir.path().join("loss.json");
    let o = bin(&["loss", "--pred", p(&a), "--labels", p(&a), "--out", p(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = json(&out);
    assert_eq!(report["aggregate"]["p2p_total"], 0.0);
    assert_eq!(report["aggregate"]["frames"], 3);
}

#[test]
fn loss_two_feature_fixture_matches_oracle() {
    let dir = TempDir::new().unwrap();
    let labels = MapFrame::new(
        "f",
        vec![
            MapFeature::new(FeatureClass::LaneDivider, InvarianceClass::UndirectedPolyline, line(0.0, 0.0, 6.0, 4)),
            MapFeature::new(FeatureClass::LaneCenter, InvarianceClass::DirectedPolyline, line(10.0, 0.0, 6.0, 4)),
        ],
    );
    // Prediction: first feature reversed and lifted 0.5 m, second exact.
    let mut pred = labels.clone();
    pred.features[0].points = line(0.5, 6.0, 0.0, 4);
    pred.features[0].confidence = 0.9;
    pred.features[1].confidence = 0.8;
    let a = fixture(&dir, "pred.jsonl", &[pred]);
    let b = fixture(&dir, "labels.jsonl", &[labels]);
    let out = dir.path().join("loss.json");
    let o = bin(&["loss", "--pred", p(&a), "--labels", p(&b), "--out", p(&out), "--n-points", "4", "--m-max", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = &json(&out)["frames"][0]["result"];
    assert_eq!(r["assignment"], serde_json::json!([0, 1]));
    let p2p = 4.0 * 0.5;
    let focal = focal_oracle(0.9, 0.25, 2.0) + focal_oracle(0.8, 0.25, 2.0);
    assert!((r["p2p_total"].as_f64().unwrap() - p2p).abs() < 1e-12);
    assert!((r["focal_total"].as_f64().unwrap() - focal).abs() < 1e-12);
    assert!((r["total_loss"].as_f64().unwrap() - (focal + p2p)).abs() < 1e-12);
}

#[test]
fn loss_failures_exit_nonzero() {
    let dir = TempDir::new().unwrap();
    let a = fixture(&dir, "a.jsonl", &[scene("x", 0.0)]);
    let b = fixture(&dir, "b.jsonl", &[scene("y", 0.0)]);
    let out = dir.path().join("loss.json");
    let o = bin(&["loss", "--pred", p(&a), "--labels", p(&dir.path().join("missing.jsonl")), "--out", p(&out)]);
    assert!(!o.status.success());
    let o = bin(&["loss", "--pred", p(&a), "--labels", p(&b), "--out", p(&out)]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("[y]") && err.contains("[x]"), "{err}");
    let o = bin(&["loss", "--pred", p(&a)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn eval_perfect_and_shifted() {
    let dir = TempDir::new().unwrap();
    let gt: Vec<_> = (0..4).map(|i| scene(&format!("f{i}"), 0.0)).collect();
    let off: Vec<_> = (0..4).map(|i| scene(&format!("f{i}"), 5.0)).collect();
    let g = fixture(&dir, "gt.jsonl", &gt);
    let s = fixture(&dir, "shift.jsonl", &off);
    let out = dir.path().join("perfect.json");
    let render = dir.path().join("svg");
    let o = bin(&["eval", "--pred", p(&g), "--gt", p(&g), "--out", p(&out), "--render-dir", p(&render)]);
    assert!(o.status.success());
    assert_eq!(json(&out)["map"], 1.0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("mAP 1.0000"));
    assert!(fs::read_to_string(render.join("f0.svg")).unwrap().starts_with("<svg"));
    let first = fs::read(&out).unwrap();
    assert!(bin(&["eval", "--pred", p(&g), "--gt", p(&g), "--out", p(&out)]).status.success());
    assert_eq!(fs::read(&out).unwrap(), first);
    let out = dir.path().join("shift.json");
    let o = bin(&["eval", "--pred", p(&s), "--gt", p(&g), "--out", p(&out), "--thresholds", "0.5,1.0,1.5"]);
    assert!(o.status.success());
    assert_eq!(json(&out)["map"], 0.0);
}

fn curb_map(id: &str, curb_shift: f64) -> MapVersion<f64> {
    let mut features = Vec::new();
    for k in 0..5 {
        let y = -80.0 + 40.0 * k as f64;
        features.push(MapFeature::new(FeatureClass::LaneDivider, InvarianceClass::UndirectedPolyline, line(y, -150.0, 150.0, 2)));
    }
    features.push(MapFeature::new(
        FeatureClass::RoadBoundary,
        InvarianceClass::UndirectedPolyline,
        line(50.0 + curb_shift, 20.0, 60.0, 3),
    ));
    MapVersion::new(id, BoundingBox::new(-300.0, -300.0, 300.0, 300.0), features)
}

fn write_map(dir: &TempDir, name: &str, map: &MapVersion<f64>) -> PathBuf {
    let path = dir.path().join(name);
    let mut buf = Vec::new();
    write_map_version(&mut buf, map).unwrap();
    fs::write(&path, buf).unwrap();
    path
}

#[test]
fn diff_identical_and_moved_curb() {
    let dir = TempDir::new().unwrap();
    let old = write_map(&dir, "old.jsonl", &curb_map("2020", 0.0));
    let same = write_map(&dir, "same.jsonl", &curb_map("2023", 0.0));
    let moved = write_map(&dir, "moved.jsonl", &curb_map("2023", 1.5));
    let out = dir.path().join("d.json");
    assert!(bin(&["diff", "--old", p(&old), "--new", p(&same), "--out", p(&out)]).status.success());
    let r = json(&out);
    assert!(r["added"].as_array().unwrap().is_empty() && r["modified"].as_array().unwrap().is_empty());
    assert!(r["regions"].as_array().unwrap().is_empty());
    assert!(bin(&["diff", "--old", p(&old), "--new", p(&moved), "--out", p(&out)]).status.success());
    let r = json(&out);
    assert_eq!(r["modified"].as_array().unwrap().len(), 1);
    assert!((r["modified"][0]["chamfer"].as_f64().unwrap() - 1.5).abs() < 1e-12);
    assert_eq!(r["regions"].as_array().unwrap().len(), 1);
}

#[test]
fn mine_emits_scene_pairs() {
    let dir = TempDir::new().unwrap();
    let old = write_map(&dir, "old.jsonl", &curb_map("2020", 0.0));
    let new = write_map(&dir, "new.jsonl", &curb_map("2023", 1.5));
    let traj = dir.path().join("traj.jsonl");
    let text: String = (0..200)
        .map(|k| format!("{{\"t\": {}, \"x\": {}, \"y\": 10.0, \"yaw\": 0.0}}\n", k as f64 * 0.5, -250.0 + 2.5 * k as f64))
        .collect();
    fs::write(&traj, text).unwrap();
    let out = dir.path().join("mined");
    let o = bin(&["mine", "--old", p(&old), "--new", p(&new), "--trajectory", p(&traj), "--out", p(&out), "--stride", "5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let prior = fs::read_to_string(out.join("prior.jsonl")).unwrap();
    let gt = fs::read_to_string(out.join("ground_truth.jsonl")).unwrap();
    assert!(prior.lines().count() > 0);
    assert_eq!(prior.lines().count(), gt.lines().count());
    assert_ne!(prior, gt);
    let summary = json(&out.join("windows.json"));
    assert!(!summary["windows"].as_array().unwrap().is_empty());
    assert!(out.join("manifest.json").exists());
    // The mined pairs feed straight into eval.
    let o = bin(&["eval", "--pred", p(&out.join("prior.jsonl")), "--gt", p(&out.join("ground_truth.jsonl")), "--out", p(&dir.path().join("e.json"))]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn mine_rejects_trajectory_without_timestamps() {
    let dir = TempDir::new().unwrap();
    let old = write_map(&dir, "old.jsonl", &curb_map("2020", 0.0));
    let traj = dir.path().join("traj.jsonl");
    fs::write(&traj, "{\"t\": 0.0, \"x\": 0, \"y\": 0}\n{\"x\": 1, \"y\": 0}\n").unwrap();
    let o = bin(&["mine", "--old", p(&old), "--new", p(&old), "--trajectory", p(&traj), "--out", p(&dir.path().join("m"))]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 2") && err.contains("missing field `t`"), "{err}");
}

#[test]
fn render_writes_one_svg_per_frame() {
    let dir = TempDir::new().unwrap();
    let a = fixture(&dir, "a.jsonl", &[scene("one", 0.0), scene("two/x", 0.0)]);
    let b = fixture(&dir, "b.jsonl", &[scene("one", 1.0)]);
    let out = dir.path().join("svg");
    let o = bin(&["render", "--scenes", p(&a), "--overlay", p(&b), "--render-dir", p(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let one = fs::read_to_string(out.join("one.svg")).unwrap();
    assert!(one.contains("id=\"a\"") && one.contains("id=\"b\""));
    assert!(out.join("two_x.svg").exists());
}
