use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use centerkit::ochm::{read_ochm, save_with_sidecar, write_ochm, Sidecar};
use centerkit_core::Heatmap;
use serde_json::{json, Value};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_centerkit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn fixture(dir: &Path) -> PathBuf {
    let coco = json!({
        "images": [
            {"id": 1, "width": 64, "height": 48, "file_name": "a.jpg"},
            {"id": 2, "width": 80, "height": 80, "file_name": "b.jpg"}
        ],
        "annotations": [
            {"id": 1, "image_id": 1, "category_id": 1, "bbox": [2, 2, 32, 32]},
            {"id": 2, "image_id": 2, "category_id": 3, "bbox": [10, 20, 40, 36]},
            {"id": 3, "image_id": 2, "category_id": 1, "bbox": [50, 4, 24, 24]}
        ],
        "categories": [{"id": 1, "name": "person"}, {"id": 3, "name": "car"}]
    });
    let path = dir.join("coco.json");
    fs::write(&path, coco.to_string()).unwrap();
    path
}

fn write_preds(dir: &Path, lines: &[Value]) -> PathBuf {
    let path = dir.join("preds.jsonl");
    let text: String = lines.iter().map(|l| format!("{l}\n")).collect();
    fs::write(&path, text).unwrap();
    path
}

fn report(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn exact_centers_score_one() {
    let dir = tempfile::tempdir().unwrap();
    let coco = fixture(dir.path());
    let preds = write_preds(
        dir.path(),
        &[
            json!({"image_id": 1, "category_id": 1, "x": 18.0, "y": 18.0, "score": 1.0}),
            json!({"image_id": 2, "category_id": 3, "x": 30.0, "y": 38.0, "score": 1.0}),
            json!({"image_id": 2, "category_id": 1, "x": 62.0, "y": 16.0, "score": 1.0}),
        ],
    );
    let r = report(&bin(&["eval", s(&coco), s(&preds)]));
    for key in ["cas", "precision", "recall", "f1"] {
        assert_eq!(r[key], 1.0, "{key}");
    }
    assert_eq!(r["units"], 3);
    assert_eq!(r["per_category"][1]["name"], "car");
}

#[test]
fn empty_predictions_score_zero() {
    let dir = tempfile::tempdir().unwrap();
    let coco = fixture(dir.path());
    let preds = write_preds(dir.path(), &[]);
    let r = report(&bin(&["eval", s(&coco), s(&preds)]));
    assert_eq!(r["cas"], 0.0);
    assert_eq!(r["recall"], 0.0);
}

#[test]
fn unknown_references_exit_5() {
    let dir = tempfile::tempdir().unwrap();
    let coco = fixture(dir.path());
    let preds = write_preds(
        dir.path(),
        &[
            json!({"image_id": 9, "category_id": 1, "x": 1.0, "y": 1.0, "score": 0.5}),
            json!({"image_id": 1, "category_id": 7, "x": 1.0, "y": 1.0, "score": 0.5}),
        ],
    );
    let out = bin(&["eval", s(&coco), s(&preds)]);
    assert_eq!(out.status.code(), Some(5));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("image_id 9") && err.contains("category_id 7"), "{err}");
}

#[test]
fn exit_codes_for_parse_io_and_format() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"images\": [}").unwrap();
    assert_eq!(bin(&["alpha", s(&bad)]).status.code(), Some(2));
    assert_eq!(bin(&["alpha", s(&dir.path().join("missing.json"))]).status.code(), Some(3));
    assert_eq!(bin(&["frobnicate"]).status.code(), Some(2));

    let maps = dir.path().join("maps");
    fs::create_dir(&maps).unwrap();
    fs::write(maps.join("1.ochm"), b"NOPE\x01\x00\x00\x00").unwrap();
    fs::write(maps.join("1.json"), r#"{"image_id": 1, "categories": [1]}"#).unwrap();
    assert_eq!(bin(&["peaks", s(&maps)]).status.code(), Some(4));
}

#[test]
fn gen_renders_and_peaks_recovers_centers() {
    let dir = tempfile::tempdir().unwrap();
    let coco = fixture(dir.path());
    let maps = dir.path().join("maps");
    assert!(bin(&["gen", s(&coco), s(&maps)]).status.success());
    let map = read_ochm(fs::File::open(maps.join("1.ochm")).unwrap()).unwrap();
    assert_eq!(map.shape(), (2, 12, 16));
    let max = map.channel(0).iter().cloned().fold(0.0f32, f32::max);
    let min = map.channel(0).iter().cloned().fold(1.0f32, f32::min);
    assert_eq!((min, max), (0.0, 1.0));
    assert!(map.channel(1).iter().all(|&v| v == 0.0));

    let out = bin(&["peaks", s(&maps)]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 3);
    let first: Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!((first["image_id"].as_i64(), first["category_id"].as_i64()), (Some(1), Some(1)));

    let none = bin(&["peaks", s(&maps), "--threshold", "1.1"]);
    assert!(none.status.success());
    assert!(none.stdout.is_empty());
}

#[test]
fn gen_without_annotations_is_all_zero() {
    let dir = tempfile::tempdir().unwrap();
    let coco = dir.path().join("empty.json");
    fs::write(
        &coco,
        r#"{"images": [{"id": 5, "width": 20, "height": 20}], "annotations": [],
            "categories": [{"id": 1, "name": "x"}]}"#,
    )
    .unwrap();
    let maps = dir.path().join("maps");
    for gt in ["gc", "gaussian", "ellipse"] {
        assert!(bin(&["gen", s(&coco), s(&maps), "--gt", gt]).status.success());
        let map = read_ochm(fs::File::open(maps.join("5.ochm")).unwrap()).unwrap();
        assert!(map.data().iter().all(|&v| v == 0.0));
    }
}

fn write_dir(dir: &Path, maps: &[Heatmap]) {
    fs::create_dir_all(dir).unwrap();
    for (k, m) in maps.iter().enumerate() {
        let side = Sidecar {
            image_id: k as i64,
            categories: (0..m.channels() as i64).collect(),
            width: None,
            height: None,
            gt_kind: None,
        };
        save_with_sidecar(dir, m, &side).unwrap();
    }
}

#[test]
fn loss_command_examples() {
    let dir = tempfile::tempdir().unwrap();
    let target = Heatmap::from_data(1, 2, 3, 4.0, vec![0.0, 0.2, 1.0, 0.7, 0.0, 0.4]).unwrap();
    let pred = Heatmap::from_data(1, 2, 3, 4.0, vec![0.1, 0.3, 0.8, 0.5, 0.05, 0.9]).unwrap();
    let (p, t) = (dir.path().join("pred"), dir.path().join("target"));
    write_dir(&p, &[pred]);
    write_dir(&t, std::slice::from_ref(&target));

    let same = report(&bin(&["loss", s(&t), s(&t), "--kernel", "qfl"]));
    assert_eq!(same["total"], 0.0);

    let q = report(&bin(&["loss", s(&p), s(&t), "--kernel", "qfl"]));
    let b = report(&bin(&["loss", s(&p), s(&t), "--kernel", "bcfl", "--alpha", "0.5"]));
    let (q, b) = (q["total"].as_f64().unwrap(), b["total"].as_f64().unwrap());
    assert!((b - 0.5 * q).abs() < 1e-12, "{b} vs {q}");

    let g = report(&bin(&["loss", s(&p), s(&t), "--gradcheck"]));
    assert!(g["gradcheck"]["max_rel_err"].as_f64().unwrap() < 1e-5);
    assert!(g["gradcheck"]["checked"].as_u64().unwrap() > 0);
}

#[test]
fn viz_writes_pgm() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("m.ochm");
    let map = Heatmap::from_data(2, 1, 2, 4.0, vec![0.0, 0.0, 1.0, 1.0]).unwrap();
    write_ochm(fs::File::create(&file).unwrap(), &map).unwrap();
    let black = bin(&["viz", s(&file)]);
    assert_eq!(black.stdout, b"P5\n2 1\n255\n\x00\x00");
    let out = dir.path().join("white.pgm");
    assert!(bin(&["viz", s(&file), "--channel", "1", "--out", s(&out)]).status.success());
    assert_eq!(fs::read(out).unwrap(), b"P5\n2 1\n255\n\xff\xff");
    assert_eq!(bin(&["viz", s(&file), "--channel", "2"]).status.code(), Some(4));
}

#[test]
fn alpha_from_directory_and_coco() {
    let dir = tempfile::tempdir().unwrap();
    let mut data = vec![0.0f32; 100];
    data[..4].fill(0.9);
    let maps = dir.path().join("maps");
    write_dir(&maps, &[Heatmap::from_data(1, 10, 10, 4.0, data).unwrap()]);
    let r = report(&bin(&["alpha", s(&maps), "--alpha-threshold", "0.6"]));
    assert_eq!(r["alpha"], 0.96);
    assert_eq!(r["cells"], 100);

    let coco = fixture(dir.path());
    let r = report(&bin(&["alpha", s(&coco)]));
    let a = r["alpha"].as_f64().unwrap();
    assert!(a > 0.5 && a < 1.0);
}

#[test]
fn config_file_then_flags() {
    let dir = tempfile::tempdir().unwrap();
    let mut data = vec![0.0f32; 100];
    data[..4].fill(0.9);
    data[4..10].fill(0.5);
    let maps = dir.path().join("maps");
    write_dir(&maps, &[Heatmap::from_data(1, 10, 10, 4.0, data).unwrap()]);
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"alpha_threshold": 0.4}"#).unwrap();
    let from_file = report(&bin(&["alpha", s(&maps), "--config", s(&cfg)]));
    assert_eq!(from_file["alpha"], 0.9);
    let overridden =
        report(&bin(&["alpha", s(&maps), "--config", s(&cfg), "--alpha-threshold", "0.6"]));
    assert_eq!(overridden["alpha"], 0.96);
}

#[test]
fn selftest_passes() {
    let out = bin(&["selftest"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("0 failed"));
}
