use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use relight::camera::Camera;
use relight::featurepack::{read_tensor, tonemap, DEFAULT_MU};
use relight::image::{Map, RgbMap};
use relight::io::{pfm, pgm, ply, save_scene_bundle, write_json, ClickGroupRecord, ClickPointRecord, ClicksRecord};
use relight::irradiance::LightCluster;
use relight::math::{vec3, Vec3};
use relight::mesh::TriangleMesh;
use relight::pipeline::{write_stamp, ClusterRecord, Workspace};
use relight::scene::{MultiViewScene, RadianceImage};
use serde_json::Value;

fn relight(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relight")).args(args).env_remove("RELIGHT_THREADS").output().expect("binary runs")
}

fn ok_json(out: Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn oracle_box(dir: &Path) -> (std::path::PathBuf, std::path::PathBuf) {
    let scene = dir.join("scene");
    let work = dir.join("work");
    ok_json(relight(&["oracle-gen", "--out", s(&scene), "--preset", "lambertian-box", "--spp", "4"]));
    ok_json(relight(&["preprocess", "--scene", s(&scene), "--out", s(&work), "--spp", "8"]));
    (scene, work)
}

#[test]
fn preprocess_writes_every_view_and_an_albedo_mesh() {
    let dir = tempfile::tempdir().unwrap();
    let (scene, work) = oracle_box(dir.path());
    let cams: Vec<Value> = serde_json::from_str(&fs::read_to_string(scene.join("cameras.json")).unwrap()).unwrap();
    let ws = Workspace::new(&work);
    for c in &cams {
        let id = c["id"].as_u64().unwrap() as u32;
        assert!(ws.e_src(id).exists() && ws.e_src_nc(id).exists() && ws.mirror(id).exists());
        let side: Value = serde_json::from_str(&fs::read_to_string(format!("{}.json", ws.e_src(id).display())).unwrap()).unwrap();
        assert_eq!(side["view"].as_u64(), Some(id as u64));
        assert_eq!(side["spp"].as_u64(), Some(8));
        assert!(side["seed"].is_u64() && side["version"].is_string());
    }
    let albedo = ply::read::<f64>(&ws.albedo()).unwrap();
    assert!(albedo.mesh.albedo.is_some());
    assert_eq!(albedo.albedo_seen.unwrap().len(), albedo.mesh.vertices.len());
}

#[test]
fn rerun_skips_and_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (scene, work) = oracle_box(dir.path());
    let before = fs::read(Workspace::new(&work).e_src(0)).unwrap();
    let again = ok_json(relight(&["preprocess", "--scene", s(&scene), "--out", s(&work), "--spp", "8"]));
    assert!(again["written"].as_array().unwrap().is_empty(), "{again}");
    assert_eq!(before, fs::read(Workspace::new(&work).e_src(0)).unwrap());

    let fresh = dir.path().join("work2");
    ok_json(relight(&["preprocess", "--scene", s(&scene), "--out", s(&fresh), "--spp", "8", "--threads", "2"]));
    assert_eq!(before, fs::read(Workspace::new(&fresh).e_src(0)).unwrap());

    let r1 = ok_json(relight(&["render-features", "--scene", s(&scene), "--out", s(&work), "--novel-camera", "1"]));
    let f1 = fs::read(work.join("render/features.ften")).unwrap();
    assert!(!r1["written"].as_array().unwrap().is_empty());
    let r2 = ok_json(relight(&["render-features", "--scene", s(&scene), "--out", s(&work), "--novel-camera", "1"]));
    assert!(r2["written"].as_array().unwrap().is_empty());
    ok_json(relight(&["render-features", "--scene", s(&scene), "--out", s(&work), "--novel-camera", "1", "--render-dir", s(&dir.path().join("r"))]));
    assert_eq!(f1, fs::read(dir.path().join("r/features.ften")).unwrap());
}

#[test]
fn noop_render_at_an_input_camera_reproduces_the_tonemapped_image() {
    let dir = tempfile::tempdir().unwrap();
    let (scene, work) = oracle_box(dir.path());
    ok_json(relight(&["render-features", "--scene", s(&scene), "--out", s(&work), "--novel-camera", "0"]));
    let stack = read_tensor(&work.join("render/features.ften")).unwrap();
    let image = pfm::read_rgb::<f64>(&scene.join("images/000.pfm")).unwrap();
    let mut worst = 0.0f64;
    for (c, name) in ["I1.r", "I1.g", "I1.b"].iter().enumerate() {
        let ch = stack.channel_by_name(name).unwrap();
        for (i, p) in image.pixels().iter().enumerate() {
            let want = tonemap(p[c], DEFAULT_MU).unwrap();
            worst = worst.max((ch[i] as f64 - want).abs());
        }
    }
    assert!(worst <= 1e-6, "max |I1 - T(I)| = {worst:e}");
}

#[test]
fn add_light_then_weighted_render() {
    let dir = tempfile::tempdir().unwrap();
    let (scene, work) = oracle_box(dir.path());
    let lights = dir.path().join("lights.json");
    fs::write(&lights, r#"[{"id": 7, "origin": [-0.2, 2.2, -0.2], "edge_u": [0.4, 0, 0], "edge_v": [0, 0, 0.4], "emittance": [3, 3, 3]}]"#).unwrap();
    let r = ok_json(relight(&["add-light", "--scene", s(&scene), "--out", s(&work), "--lights", s(&lights), "--spp", "4", "--views", "0,1"]));
    assert_eq!(r["written"].as_array().unwrap().len(), 2);
    let missing = relight(&["render-features", "--scene", s(&scene), "--out", s(&work), "--novel-camera", "0", "--light-weights", "7=1"]);
    assert!(!missing.status.success());
    ok_json(relight(&["add-light", "--scene", s(&scene), "--out", s(&work), "--lights", s(&lights), "--spp", "4"]));
    ok_json(relight(&["render-features", "--scene", s(&scene), "--out", s(&work), "--novel-camera", "0", "--light-weights", "7=0.5", "--alpha-dim", "0.5"]));
    let stack = read_tensor(&work.join("render/features.ften")).unwrap();
    assert_eq!(stack.channel_count(), 66);
    assert!(stack.channel_by_name("Eadd.r").unwrap().iter().any(|v| *v > 0.0));
    assert_eq!(stack.metadata["alpha_dim"].as_f64(), Some(0.5));
}

#[test]
fn flow_pairs_default_to_consecutive_views() {
    let dir = tempfile::tempdir().unwrap();
    let (scene, work) = oracle_box(dir.path());
    let r = ok_json(relight(&["flow", "--scene", s(&scene), "--out", s(&work), "--views", "0,1,2"]));
    assert_eq!(r["result"]["pairs"].as_u64(), Some(4));
    let f = pfm::read_rgb::<f64>(&work.join("flow/001_000.pfm")).unwrap();
    assert!(f.pixels().iter().any(|p| p.z == 1.0));
}

#[test]
fn failures_are_reported_as_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = relight(&["preprocess", "--scene", s(&dir.path().join("nope")), "--out", s(&dir.path().join("w"))]);
    assert!(!out.status.success());
    let err: Value = serde_json::from_slice(&out.stderr).expect("stderr is JSON");
    assert!(err["error"].is_string());
    assert_eq!(err["kind"], "missing_file");

    let out = relight(&["render-features", "--scene", "x", "--out", "y", "--novel-camera", "0", "--alpha-dim", "2"]);
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["kind"], "invalid_edit");

    let out = relight(&["bogus"]);
    assert!(!out.status.success());
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["kind"], "usage");
}

/// One view of a plane; clicked pixel (1, 1) is lit by the clipped cluster,
/// (5, 5) is in its shadow. Both share albedo a = 0.5 and the cluster has
/// intensity 2.
#[test]
fn solve_lights_recovers_the_hand_built_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let (scene_dir, work) = (dir.path().join("scene"), dir.path().join("work"));
    let cam = Camera::<f64>::look_at(0, 8, 8, 60.0, vec3(0.0, 0.0, 2.0), Vec3::zero(), vec3(0.0, 1.0, 0.0));
    let mesh = TriangleMesh::quad(vec3(-2.0, -2.0, 0.0), vec3(4.0, 0.0, 0.0), vec3(0.0, 4.0, 0.0), 2);
    let gray = |v: f64| vec3(v, v, v);
    let mut img: RgbMap<f64> = Map::filled(8, 8, gray(0.1));
    img.set(1, 1, gray(0.4));
    img.set(5, 5, gray(0.05));
    let scene = MultiViewScene::new(vec![cam], vec![RadianceImage::new(img)], mesh.clone()).unwrap();
    save_scene_bundle(&scene_dir, &scene, None).unwrap();

    let ws = Workspace::new(&work);
    ply::write(&ws.mesh(), &mesh, None).unwrap();
    write_stamp(&ws.mesh(), "mesh", 0, 0, Value::Null, "m").unwrap();
    let mut e_nc: RgbMap<f64> = Map::filled(8, 8, gray(0.2));
    e_nc.set(5, 5, gray(0.1));
    let mut e_l: RgbMap<f64> = Map::filled(8, 8, gray(0.3));
    e_l.set(5, 5, gray(0.0));
    pfm::write_rgb(&ws.e_src_nc(0), &e_nc).unwrap();
    write_stamp(&ws.e_src_nc(0), "e_src_nc", 0, 0, Value::Null, "n").unwrap();
    pfm::write_rgb(&ws.cluster(0, 0), &e_l).unwrap();
    pgm::write_mask(&ws.valid(0), &Map::filled(8, 8, true)).unwrap();
    let cluster = LightCluster::<f64>::from_voxels(0, 0.02, [[0, 0, 10]].into_iter().collect());
    write_json(&ws.clusters(), &vec![ClusterRecord::from_cluster(&cluster)]).unwrap();
    write_stamp(&ws.clusters(), "clusters", 0, 0, Value::Null, "c").unwrap();
    let clicks = dir.path().join("clicks.json");
    let pts = vec![ClickPointRecord { view: 0, x: 1, y: 1 }, ClickPointRecord { view: 0, x: 5, y: 5 }];
    write_json(&clicks, &ClicksRecord { groups: vec![ClickGroupRecord { points: pts }] }).unwrap();

    let r = ok_json(relight(&["solve-lights", "--scene", s(&scene_dir), "--out", s(&work), "--clicks", s(&clicks)]));
    for c in 0..3 {
        let alpha = r["result"]["alpha"][0][c].as_f64().unwrap();
        let beta = r["result"]["beta"][0][c].as_f64().unwrap();
        assert!((alpha - 2.0).abs() < 1e-6, "alpha = {alpha}");
        assert!((beta - 2.0).abs() < 1e-6, "beta = {beta}");
    }
    let combined = pfm::read_rgb::<f64>(&ws.e_src_combined(0)).unwrap();
    assert!((combined.get(1, 1).x - 0.8).abs() < 1e-6);
    assert!(ws.albedo().exists());
}
