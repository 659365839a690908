mod common;

use std::fs;
use std::path::Path;

use common::*;
use serde_json::{json, Value};

fn run_ok(args: &[&str]) -> String {
    let o = boxpose(args);
    assert!(o.status.success(), "boxpose {args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn files_with_suffix(dir: &Path, suffix: &str) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(suffix))
        .collect();
    v.sort();
    v
}

fn ann() -> String {
    fixture("annotations.json").to_str().unwrap().to_string()
}

#[test]
fn render_writes_one_map_and_sidecar_per_instance() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r");
    let stdout = run_ok(&["render", "--annotations", &ann(), "--out", path_str(&out)]);
    assert!(stdout.contains("5/5"));
    let pngs = files_with_suffix(&out, ".png");
    assert_eq!(pngs.len(), 5);
    let sidecars: Vec<_> = files_with_suffix(&out, ".json").into_iter().filter(|n| n != "config.json").collect();
    assert_eq!(sidecars.len(), 5);
    let side = read_json(&out.join("f0-car-a.json"));
    assert_eq!(side["token"], "f0-car-a");
    assert_eq!(side["variant"], "pose_map");
    assert_eq!(side["palette_hash"].as_str().unwrap().len(), 64);
    assert!(out.join("config.json").is_file());
}

#[test]
fn six_channel_writes_tensor_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r");
    run_ok(&["render", "--annotations", &ann(), "--variant", "six_channel", "--size", "160x90", "--out", path_str(&out)]);
    assert_eq!(files_with_suffix(&out, ".cmap").len(), 5);
    assert!(files_with_suffix(&out, ".png").is_empty());
    let map = boxpose::formats::read_cmap(&out.join("f1-bus-d.cmap")).unwrap();
    assert_eq!((map.width, map.height, map.channels), (160, 90, 6));
    // each pixel belongs to at most one face
    assert!(map.data.chunks(6).all(|px| px.iter().sum::<f32>() <= 1.0));
}

#[test]
fn render_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        run_ok(&["render", "--annotations", &ann(), "--cropped", "--edit", "flip", "--out", path_str(out)]);
    }
    assert_eq!(read_tree(&a), read_tree(&b));
    assert!(a.join("f0-car-a_flip.png").is_file());
}

#[test]
fn mask_counts_and_occluders() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m");
    let masks = fixture("occluder_masks");
    run_ok(&["mask", "--annotations", &ann(), "--occluder-masks", path_str(&masks), "--out", path_str(&out)]);
    assert_eq!(files_with_suffix(&out, "_hull.png").len(), 5);
    assert_eq!(files_with_suffix(&out, "_occlusion.png").len(), 5);
    let truck = read_json(&out.join("f0-truck-b_mask.json"));
    assert_eq!(truck["occluders"], json!(["f0-car-a"]));
    assert!(truck["occlusion_pixels"].as_u64().unwrap() < truck["hull_pixels"].as_u64().unwrap());
    let car = read_json(&out.join("f0-car-a_mask.json"));
    assert_eq!(car["occlusion_pixels"], car["hull_pixels"]);
}

#[test]
fn mask_without_occluder_directory_writes_hulls_only() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m");
    run_ok(&["mask", "--annotations", &ann(), "--out", path_str(&out)]);
    assert_eq!(files_with_suffix(&out, "_hull.png").len(), 5);
    assert!(files_with_suffix(&out, "_occlusion.png").is_empty());
}

#[test]
fn missing_occluder_mask_degrades_to_hull() {
    let dir = tempfile::tempdir().unwrap();
    let partial = dir.path().join("masks");
    fs::create_dir(&partial).unwrap();
    for e in fs::read_dir(fixture("occluder_masks")).unwrap() {
        let p = e.unwrap().path();
        if p.file_name().unwrap() != "f0-car-a.png" {
            fs::copy(&p, partial.join(p.file_name().unwrap())).unwrap();
        }
    }
    let out = dir.path().join("m");
    let o = boxpose(&["mask", "--annotations", &ann(), "--occluder-masks", path_str(&partial), "--out", path_str(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("f0-car-a"));
    assert!(out.join("f0-truck-b_hull.png").is_file());
    assert!(!out.join("f0-truck-b_occlusion.png").exists());
    assert_eq!(read_json(&out.join("f0-truck-b_mask.json"))["missing_occluder_masks"], json!(["f0-car-a"]));
}

#[test]
fn crop_writes_square_crops() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c");
    run_ok(&["crop", "--annotations", &ann(), "--size", "256x256", "--out", path_str(&out)]);
    let crops = files_with_suffix(&out, "_crop.png");
    assert_eq!(crops.len(), 5);
    let img = boxpose::formats::read_png(&out.join(&crops[0])).unwrap();
    assert_eq!((img.width, img.height), (256, 256));
    let spec = read_json(&out.join("f0-car-a_crop.json"));
    assert!(spec["crop"]["edge"].as_u64().unwrap() > 96);
}

#[test]
fn filter_keeps_all_fixture_instances() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("f");
    run_ok(&["filter", "--annotations", &ann(), "--out", path_str(&out)]);
    let listing = read_json(&out.join("instances.json"));
    assert_eq!(listing["count"], 5);
}

fn single_frame_annotations(dir: &Path) -> String {
    let mut a = read_json(&fixture("annotations.json"));
    let frames = a["frames"].as_array().unwrap()[..1].to_vec();
    a["frames"] = Value::Array(frames);
    let instances: Vec<Value> =
        a["instances"].as_array().unwrap().iter().filter(|i| i["frame_token"] == "f0").cloned().collect();
    a["instances"] = Value::Array(instances);
    let p = dir.join("one.json");
    fs::write(&p, serde_json::to_string(&a).unwrap()).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn place_emits_24_per_frame() {
    let dir = tempfile::tempdir().unwrap();
    let drivable = fixture("drivable.json");
    let one = single_frame_annotations(dir.path());
    let outs: Vec<_> = ["a", "b", "c"].iter().map(|n| dir.path().join(n)).collect();
    let s = run_ok(&["place", "--annotations", &one, "--drivable", path_str(&drivable), "--seed", "4", "--out", path_str(&outs[0])]);
    assert_eq!(s.trim(), "24");
    run_ok(&["place", "--annotations", &one, "--drivable", path_str(&drivable), "--seed", "4", "--out", path_str(&outs[1])]);
    let s = run_ok(&["place", "--annotations", &ann(), "--drivable", path_str(&drivable), "--seed", "4", "--out", path_str(&outs[2])]);
    assert_eq!(s.trim(), "72");
    let a = fs::read(outs[0].join("instructions.json")).unwrap();
    let b = fs::read(outs[1].join("instructions.json")).unwrap();
    assert_eq!(a, b);
    let doc: Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(doc["instructions"].as_array().unwrap().len(), 24);
    assert_eq!(doc["instructions"][0]["kind"], "place");
}

#[test]
fn place_reports_frames_without_region() {
    let dir = tempfile::tempdir().unwrap();
    let mut d = read_json(&fixture("drivable.json"));
    d.as_object_mut().unwrap().remove("f2");
    let p = dir.path().join("d.json");
    fs::write(&p, d.to_string()).unwrap();
    let out = dir.path().join("p");
    let o = boxpose(&["place", "--annotations", &ann(), "--drivable", path_str(&p), "--out", path_str(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), "48");
    assert!(String::from_utf8_lossy(&o.stderr).contains("f2"));
}

fn eval(dir: &Path, detections: &Value, mode: &str) -> Value {
    let p = dir.join(format!("det-{mode}.json"));
    fs::write(&p, detections.to_string()).unwrap();
    let out = dir.join(format!("eval-{mode}-{}", detections.to_string().len()));
    let ins = fixture("instructions.json");
    run_ok(&["eval", "--instructions", path_str(&ins), "--detections", path_str(&p), "--metric-mode", mode, "--out", path_str(&out)]);
    read_json(&out.join("report.json"))
}

fn instruction_records() -> Vec<Value> {
    read_json(&fixture("instructions.json"))["instructions"].as_array().unwrap().clone()
}

#[test]
fn eval_perfect_detector() {
    let dir = tempfile::tempdir().unwrap();
    let frames: serde_json::Map<String, Value> = instruction_records()
        .into_iter()
        .map(|i| {
            let det = json!({"category": i["category"], "center": i["center"], "size": i["size"], "yaw": i["yaw"], "score": 1.0});
            (i["token"].as_str().unwrap().to_string(), json!([det]))
        })
        .collect();
    let r = eval(dir.path(), &json!({ "frames": frames }), "both");
    for k in ["m_ate_ground_plane", "m_ate_full_3d", "m_aoe", "flip_rate"] {
        assert_eq!(r[k], 0.0, "{k}");
    }
    assert_eq!(r["match_rate"], 1.0);
}

#[test]
fn eval_empty_detections() {
    let dir = tempfile::tempdir().unwrap();
    let r = eval(dir.path(), &json!({ "frames": {} }), "ground_plane");
    assert_eq!(r["match_rate"], 0.0);
    assert_eq!(r["matched"], 0);
    assert!(r["m_aoe"].is_null());
    assert!(r.get("m_ate_full_3d").is_none());
}

#[test]
fn eval_injected_errors() {
    // The bundled detections see the unedited vehicles, offset by (0.1, -0.05) m with a
    // 0.01 rad heading error, while every instruction asks for a flipped vehicle.
    let dir = tempfile::tempdir().unwrap();
    let dets = read_json(&fixture("detections.json"));
    let r = eval(dir.path(), &dets, "full_3d");
    let ate = (0.1f64.powi(2) + 0.05f64.powi(2)).sqrt();
    let aoe = std::f64::consts::PI - 0.01;
    assert!((r["m_ate_full_3d"].as_f64().unwrap() - ate).abs() < 1e-9);
    assert!((r["m_aoe"].as_f64().unwrap() - aoe).abs() < 1e-9);
    assert_eq!(r["flip_rate"], 1.0);
    assert_eq!(r["classes"].as_object().unwrap().len(), 3);
    assert!(r.get("m_ate_ground_plane").is_none());

    // move one car out of matching range and give another a quarter-turn heading error
    let mut dets = dets;
    let f0 = dets["frames"]["f0"].as_array_mut().unwrap();
    f0[0]["center"][0] = json!(f0[0]["center"][0].as_f64().unwrap() + 5.0);
    let f1 = dets["frames"]["f1"].as_array_mut().unwrap();
    let car_c = f1.iter_mut().find(|d| d["category"] == "car").unwrap();
    let flipped_yaw = read_json(&fixture("instructions.json"))["instructions"][2]["yaw"].as_f64().unwrap();
    car_c["yaw"] = json!(boxpose::geometry::normalize_angle(flipped_yaw + 1.0).unwrap());
    let r = eval(dir.path(), &dets, "ground_plane");
    let car = &r["classes"]["car"];
    assert_eq!(car["count"], 3);
    assert_eq!(car["matched"], 2);
    assert!((car["mean_aoe"].as_f64().unwrap() - (1.0 + aoe) / 2.0).abs() < 1e-9);
    assert_eq!(car["flip_rate"], 0.5);
    assert!((r["match_rate"].as_f64().unwrap() - 0.8).abs() < 1e-12);
    // classes weigh equally: (car, truck, bus) flip rates 0.5, 1, 1
    assert!((r["flip_rate"].as_f64().unwrap() - 2.5 / 3.0).abs() < 1e-12);
}

#[test]
fn fid_matches_reference_value() {
    // computed independently with numpy/scipy from the same feature files
    const REFERENCE: f64 = 9.278469251848763;
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    let (a, b) = (fixture("real.feat"), fixture("generated.feat"));
    let s = run_ok(&["fid", path_str(&a), path_str(&b), "--out", path_str(&out)]);
    let v: f64 = s.trim().parse().unwrap();
    assert!((v - REFERENCE).abs() < 1e-9, "{v}");
    assert_eq!(read_json(&out.join("fid.json"))["dim"], 16);
}

#[test]
fn config_file_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, json!({"annotations": ann(), "variant": "faces", "seed": 3}).to_string()).unwrap();
    let out = dir.path().join("o");
    run_ok(&["render", "--config", path_str(&cfg), "--variant", "box_depth", "--out", path_str(&out)]);
    let echo = read_json(&out.join("config.json"));
    assert_eq!(echo["variant"], "box_depth");
    assert_eq!(echo["seed"], 3);
    let (w, h, depth) = boxpose::formats::read_depth_png(&out.join("f0-car-a.png")).unwrap();
    assert_eq!((w, h), (800, 450));
    assert!(depth.iter().any(|&d| d > 0));
}

#[test]
fn fatal_errors_exit_1() {
    let o = boxpose(&["render", "--annotations", "/nonexistent/annotations.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"frames": [], "instances": [{"instance_token": "x"}]}"#).unwrap();
    let o = boxpose(&["render", "--annotations", path_str(&bad), "--out", path_str(&dir.path().join("o"))]);
    assert_eq!(o.status.code(), Some(1));
}
