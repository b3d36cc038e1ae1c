use std::path::Path;
use std::process::{Command, Output};

use irrobust_core::{load_checkpoint, save_checkpoint, Checkpoint, ImageBuffer, NamedTensor};
use serde_json::json;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_irrobust"))
        .args(args)
        .env_remove("ROBUST_OD_SCHEDULE")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn help_and_usage_errors() {
    let help = ok(&["--help"]);
    assert!(String::from_utf8_lossy(&help.stdout).contains("build-bench"));
    let bad = run(&["--bogus"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("error[usage]"));
    let missing = run(&["merge", "--base", "/no/such/a.safetensors", "--tuned", "/no/such/b.safetensors", "--out", "/tmp/x.safetensors"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("error[io]"));
}

#[test]
fn build_merge_eval_report_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();

    // Two 64x64 frames, one person box each.
    let images = root.join("images");
    std::fs::create_dir_all(&images).unwrap();
    for i in 0..2u32 {
        let gray: Vec<u8> = (0..64 * 64).map(|k| ((k % 64) * 3 + i * 20) as u8).collect();
        ImageBuffer::from_gray(64, 64, &gray).unwrap().save_png(&images.join(format!("f{i}.png"))).unwrap();
    }
    let boxes = [[10.0, 12.0, 20.0, 30.0], [30.0, 8.0, 16.0, 40.0]];
    let ann = json!({
        "images": [
            {"id": 1, "file_name": "f0.png", "width": 64, "height": 64},
            {"id": 2, "file_name": "f1.png", "width": 64, "height": 64}
        ],
        "annotations": [
            {"id": 1, "image_id": 1, "category_id": 1, "bbox": boxes[0], "iscrowd": 0, "area": 600.0},
            {"id": 2, "image_id": 2, "category_id": 1, "bbox": boxes[1], "iscrowd": 0, "area": 640.0}
        ],
        "categories": [{"id": 1, "name": "person"}]
    });
    let ann_path = root.join("ann.json");
    std::fs::write(&ann_path, ann.to_string()).unwrap();

    let bench = root.join("bench");
    ok(&[
        "--seed", "7", "build-bench", "--images", p(&images), "--ann", p(&ann_path), "--out", p(&bench),
        "--kinds", "gaussian_noise,fog", "--severities", "1", "--dataset", "flir",
    ]);
    assert!(bench.join("manifest.json").is_file());
    assert!(bench.join("annotations.json").is_file());
    for kind in ["gaussian_noise", "fog"] {
        for f in ["f0.png", "f1.png"] {
            assert!(bench.join(kind).join("severity_1").join(f).is_file(), "{kind}/{f}");
        }
    }

    let mut base = Checkpoint::default();
    let mut tuned = Checkpoint::default();
    base.insert(NamedTensor::from_f32("w", vec![4], &[0.0, 1.0, 2.0, 3.0]).unwrap()).unwrap();
    tuned.insert(NamedTensor::from_f32("w", vec![4], &[2.0, 3.0, 4.0, 5.0]).unwrap()).unwrap();
    let (bp, tp, mp) = (root.join("base.safetensors"), root.join("tuned.safetensors"), root.join("merged.safetensors"));
    save_checkpoint(&base, &bp).unwrap();
    save_checkpoint(&tuned, &tp).unwrap();
    ok(&["merge", "--base", p(&bp), "--tuned", p(&tp), "--out", p(&mp), "--lambda", "0.5"]);
    let merged = load_checkpoint(&mp).unwrap();
    assert_eq!(merged.get("w").unwrap().to_f32_vec().unwrap(), vec![1.0, 2.0, 3.0, 4.0]);

    // Clean and gaussian_noise results are perfect. Fog finds the first person,
    // then ranks a miss above the second: AP = 51/101 on the 101-point grid.
    let det = |img: u64, b: [f64; 4], s: f64| json!({"image_id": img, "category_id": 1, "bbox": b, "score": s});
    let perfect = json!([det(1, boxes[0], 0.9), det(2, boxes[1], 0.8)]);
    let partial = json!([det(1, boxes[0], 0.9), det(2, [0.0, 0.0, 5.0, 5.0], 0.8)]);
    let dets = root.join("dets");
    std::fs::create_dir_all(dets.join("corrupted")).unwrap();
    std::fs::write(dets.join("clean.json"), perfect.to_string()).unwrap();
    std::fs::write(dets.join("corrupted/gaussian_noise_severity_1.json"), perfect.to_string()).unwrap();
    std::fs::write(dets.join("corrupted/fog_severity_1.json"), partial.to_string()).unwrap();

    let results = root.join("results");
    let method = results.join("method_a");
    ok(&[
        "eval", "--gt", p(&bench.join("annotations.json")), "--clean", p(&dets.join("clean.json")),
        "--corrupted", p(&dets.join("corrupted")), "--out", p(&method),
    ]);
    let eval: serde_json::Value = serde_json::from_slice(&std::fs::read(method.join("eval.json")).unwrap()).unwrap();
    let expected_mpc = (1.0 + 51.0 / 101.0) / 2.0;
    assert!((eval["ap50"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!((eval["mpc"].as_f64().unwrap() - expected_mpc).abs() < 1e-12);
    assert!(method.join("eval.csv").is_file());

    let tables = root.join("tables");
    ok(&["report", "table", "--in", p(&results), "--out", p(&tables)]);
    let csv = std::fs::read_to_string(tables.join("table.csv")).unwrap();
    assert!(csv.contains("100.00"), "{csv}");
    assert!(csv.contains("50.49"), "{csv}");
    assert!(csv.contains("75.24"), "{csv}");
    assert!(tables.join("table_precise.csv").is_file());

    let curves = root.join("curves");
    ok(&["report", "curves", "--in", p(&results), "--out", p(&curves)]);
    assert!(curves.join("fog.svg").is_file());
    assert!(curves.join("fog.csv").is_file());
}
