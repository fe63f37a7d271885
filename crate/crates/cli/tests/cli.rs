use std::path::Path;
use std::process::{Command, Output};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_corridor-gt")).args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn synth_generate_evaluate_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let scenes = tmp.path().join("scenes");
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let out = cli(&["synth", "--kind", "highway", "--count", "3", "--seed", "4", "--out", s(&scenes)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = tmp.path().join("report.json");
    let out = cli(&["generate", s(&scenes), "--out", s(&a), "--report", s(&report)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["processed"], 3);
    let out = cli(&["generate", s(&scenes), "--out", s(&b), "--workers", "2"]);
    assert!(out.status.success());

    let manifest = scenes.join("manifest.json");
    let out = cli(&["evaluate", s(&a), s(&b), "--batch-size", "2", "--manifest", s(&manifest)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "scenario,count,dice,jaccard,avg");
    assert_eq!(lines[1], "highway,2,1.000,1.000,1.000");
    assert!(lines.last().unwrap().starts_with("all_weighted,2,1.000"));
}

#[test]
fn elevation_toggle_is_a_no_op_on_flat_terrain() {
    let tmp = tempfile::tempdir().unwrap();
    let scenes = tmp.path().join("scenes");
    assert!(cli(&["synth", "--kind", "sharp_curve", "--count", "2", "--out", s(&scenes), "--no-obstacles"]).status.success());
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(cli(&["generate", s(&scenes), "--out", s(&a)]).status.success());
    assert!(cli(&["generate", s(&scenes), "--out", s(&b), "--no-elevation"]).status.success());
    let out = cli(&["evaluate", s(&a), s(&b)]);
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().contains("all_weighted,1,1.000,1.000,1.000"));
}

#[test]
fn schema_error_exits_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("bad.json"), r#"{"frame_id": "x", "surprise": 1}"#).unwrap();
    let out = cli(&["generate", s(tmp.path()), "--out", s(&tmp.path().join("o"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!tmp.path().join("o").join("x.pgm").exists());
}

#[test]
fn empty_evaluation_exits_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    std::fs::create_dir_all(&a).unwrap();
    std::fs::create_dir_all(&b).unwrap();
    let out = cli(&["evaluate", s(&a), s(&b)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_kind_exits_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = cli(&["synth", "--kind", "moon_base", "--out", s(tmp.path())]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn overlay_writes_png_of_image_size() {
    let tmp = tempfile::tempdir().unwrap();
    let scenes = tmp.path().join("scenes");
    let masks = tmp.path().join("masks");
    assert!(cli(&["synth", "--kind", "highway", "--count", "1", "--out", s(&scenes)]).status.success());
    assert!(cli(&["generate", s(&scenes), "--out", s(&masks)]).status.success());
    let mask = std::fs::read_dir(&masks).unwrap().next().unwrap().unwrap().path();
    let m = corridor_gt::mask::Mask::read_pgm(&mask).unwrap();
    let (w, h) = m.shape();
    let img = tmp.path().join("cam.png");
    image::RgbImage::from_pixel(w as u32, h as u32, image::Rgb([10, 20, 30])).save(&img).unwrap();
    let png = tmp.path().join("over.png");
    let out = cli(&["overlay", s(&img), s(&mask), "--alpha", "1", "--tint", "255,0,0", "--out", s(&png)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let o = image::open(&png).unwrap().to_rgb8();
    assert_eq!(o.dimensions(), (w as u32, h as u32));
    let red = o.pixels().filter(|p| p.0 == [255, 0, 0]).count();
    assert_eq!(red, m.count());
}

#[test]
fn heightmap_sidecar_drives_generation() {
    let tmp = tempfile::tempdir().unwrap();
    let scenes = tmp.path().join("scenes");
    assert!(cli(&["synth", "--kind", "highway", "--count", "1", "--terrain", "ramp", "--out", s(&scenes)]).status.success());
    let scene = std::fs::read_dir(&scenes)
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.file_name().unwrap() != "manifest.json")
        .unwrap();
    let map = tmp.path().join("map.json");
    let out = cli(&["heightmap", s(&scene), "--out", s(&map)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(cli(&["generate", s(&scenes), "--out", s(&a)]).status.success());
    assert!(cli(&["generate", s(&scenes), "--out", s(&b), "--height-map", s(&map)]).status.success());
    let out = cli(&["evaluate", s(&a), s(&b)]);
    assert!(String::from_utf8(out.stdout).unwrap().contains("all_weighted,1,1.000,1.000,1.000"));
}
