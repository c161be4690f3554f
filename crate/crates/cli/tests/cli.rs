use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ciss::eval::{greedy_nms, GroundTruth};
use ciss::features::TextureSource;
use ciss::formats::{read_detections, read_ground_truth, read_rescore_csv, write_detections, write_ground_truth, RescoreRow};
use ciss::model::load_model;
use ciss::rescore::{rescore_image, Detection, RescoreConfig, ScoreProvider};
use ciss::synth::generate_scene;
use ciss::{load_image, BBox};
use serde_json::{json, Value};

fn ciss(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ciss")).args(args).output().unwrap()
}

fn write_config(dir: &Path, name: &str, v: Value) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, serde_json::to_string_pretty(&v).unwrap()).unwrap();
    p
}

fn run_ok(args: &[&str]) -> Output {
    let out = ciss(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

/// Synthesizes `n` scenes into `dir/data` and fits a model from them.
fn dataset(dir: &Path, n: usize) -> PathBuf {
    let cfg = write_config(
        dir,
        "base.json",
        json!({"output": "data", "pairs": "data/pairs.jsonl", "patches": "data/patches.jsonl",
               "model": "model.json", "min_count": 20, "workers": 2}),
    );
    run_ok(&["synth", "-c", cfg.to_str().unwrap(), "-n", &n.to_string(), "--seed", "7"]);
    run_ok(&["fit", "-c", cfg.to_str().unwrap()]);
    cfg
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(ciss(&[]).status.code(), Some(1));
    assert_eq!(ciss(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(ciss(&["synth", "-c", "x.json"]).status.code(), Some(1));
    assert_eq!(ciss(&["eval", "-c", "x.json", "--ap-mode", "bogus"]).status.code(), Some(1));
    assert_eq!(ciss(&["--help"]).status.code(), Some(0));
}

#[test]
fn data_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        json!({"model": "missing.json", "images_dir": ".", "detections": "d.jsonl", "output": "o.csv"}),
    );
    fs::write(dir.path().join("d.jsonl"), "").unwrap();
    assert_eq!(ciss(&["rescore", "-c", cfg.to_str().unwrap()]).status.code(), Some(2));

    fs::write(dir.path().join("pairs.jsonl"), "").unwrap();
    fs::write(dir.path().join("patches.jsonl"), "{\"categories\":[\"a\"]}\n").unwrap();
    let cfg = write_config(
        dir.path(),
        "f.json",
        json!({"pairs": "pairs.jsonl", "patches": "patches.jsonl", "model": "m.json"}),
    );
    let out = ciss(&["fit", "-c", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no valid bins"));

    assert_eq!(ciss(&["fit", "-c", dir.path().join("nope.json").to_str().unwrap()]).status.code(), Some(2));
    let bad = write_config(dir.path(), "bad.json", json!({"workers": 0}));
    assert_eq!(ciss(&["fit", "-c", bad.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn fit_table_matches_model_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "base.json",
        json!({"output": "data", "pairs": "data/pairs.jsonl", "patches": "data/patches.jsonl",
               "model": "model.json", "min_count": 20}),
    );
    run_ok(&["synth", "-c", cfg.to_str().unwrap(), "-n", "12", "--seed", "3"]);
    let out = run_ok(&["fit", "-c", cfg.to_str().unwrap()]);
    let model = load_model(&dir.path().join("model.json")).unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    let mut rows = 0;
    for line in text.lines().skip(1).take_while(|l| !l.starts_with("gamma")) {
        let f: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        let d = 0.5 * (f[0] + f[1]);
        assert!((f[5] - model.gamma_ss(d)).abs() <= 1e-9 * (1.0 + f[5].abs()));
        assert!((f[8] - model.gamma_ls(d)).abs() <= 1e-9 * (1.0 + f[8].abs()));
        assert!((f[6] - (f[4] - f[5])).abs() <= 1e-8 * (1.0 + f[4].abs()));
        rows += 1;
    }
    assert_eq!(rows, 20);
    assert!(text.contains(&format!("gamma_ss: a={} b={}", model.gamma.ss.a, model.gamma.ss.b)));
}

fn nms_in_process(dets: Vec<Detection>, iou: f64) -> Vec<Detection> {
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, d) in dets.iter().enumerate() {
        groups.entry(d.category.clone()).or_default().push(i);
    }
    let mut keep = vec![false; dets.len()];
    for idx in groups.values() {
        let items: Vec<(BBox, f64)> = idx.iter().map(|&i| (dets[i].bbox, dets[i].base_score)).collect();
        for k in greedy_nms(&items, iou) {
            keep[idx[k]] = true;
        }
    }
    dets.into_iter().zip(keep).filter_map(|(d, k)| k.then_some(d)).collect()
}

#[test]
fn single_image_rescore_matches_library_call() {
    let dir = tempfile::tempdir().unwrap();
    dataset(dir.path(), 16);
    let data = dir.path().join("data");
    let all = read_detections(&data.join("detections.jsonl")).unwrap();
    let id = all[0].image_id.clone();
    let mine: Vec<Detection> = all.into_iter().filter(|d| d.image_id == id).collect();
    write_detections(&dir.path().join("one.jsonl"), &mine).unwrap();
    let cfg = write_config(
        dir.path(),
        "r.json",
        json!({"model": "model.json", "images_dir": "data/images", "detections": "one.jsonl", "output": "one.csv"}),
    );
    run_ok(&["rescore", "-c", cfg.to_str().unwrap()]);
    let rows = read_rescore_csv(&dir.path().join("one.csv")).unwrap();

    let model = load_model(&dir.path().join("model.json")).unwrap();
    let img = load_image(&data.join("images").join(format!("{id}.ppm"))).unwrap();
    let kept = nms_in_process(mine, 0.3);
    let sp = ScoreProvider::lookup(kept.iter().map(|d| (d.category.clone(), d.bbox, d.base_score)).collect(), 0.3).unwrap();
    let want: Vec<RescoreRow> = rescore_image(&img, &kept, &model, &sp, &RescoreConfig::default())
        .unwrap()
        .iter()
        .map(RescoreRow::from_detection)
        .collect();
    assert_eq!(rows, want);
    assert!(rows.iter().any(|r| r.n_supporters > 0));
}

#[test]
fn pre_nms_changes_survivors_only_through_scores() {
    let dir = tempfile::tempdir().unwrap();
    dataset(dir.path(), 16);
    let data = dir.path().join("data");
    // add shifted duplicates so that NMS has something to do
    let mut dets = read_detections(&data.join("detections.jsonl")).unwrap();
    let extra: Vec<Detection> = dets
        .iter()
        .filter(|d| d.bbox.x >= 3)
        .map(|d| {
            let mut e = d.clone();
            e.bbox = BBox::new(d.bbox.x - 3, d.bbox.y, d.bbox.w, d.bbox.h);
            e.base_score = (d.base_score * 0.9).min(1.0);
            e
        })
        .collect();
    dets.extend(extra);
    write_detections(&dir.path().join("dup.jsonl"), &dets).unwrap();
    let run = |name: &str, pre: bool| {
        let cfg = write_config(
            dir.path(),
            &format!("{name}.json"),
            json!({"model": "model.json", "images_dir": "data/images", "detections": "dup.jsonl",
                   "output": format!("{name}.csv"), "nms_iou": 1.0}),
        );
        let mut args = vec!["rescore", "-c", cfg.to_str().unwrap()];
        if pre {
            args.push("--pre-nms");
        }
        run_ok(&args);
        read_rescore_csv(&dir.path().join(format!("{name}.csv"))).unwrap()
    };
    // IoU threshold 1 suppresses nothing: both runs see the full candidate set
    let full = run("full", true);
    assert_eq!(full.len(), dets.len());

    let cfg = write_config(
        dir.path(),
        "pre.json",
        json!({"model": "model.json", "images_dir": "data/images", "detections": "dup.jsonl",
               "output": "pre.csv", "nms_iou": 0.3}),
    );
    run_ok(&["rescore", "-c", cfg.to_str().unwrap(), "--pre-nms"]);
    let pre = read_rescore_csv(&dir.path().join("pre.csv")).unwrap();

    // re-run NMS on the ciss column of the full run
    let mut want = Vec::new();
    let mut groups: BTreeMap<(String, String), Vec<usize>> = BTreeMap::new();
    for (i, r) in full.iter().enumerate() {
        groups.entry((r.image_id.clone(), r.category.clone())).or_default().push(i);
    }
    let mut keep = vec![false; full.len()];
    for idx in groups.values() {
        let items: Vec<(BBox, f64)> = idx.iter().map(|&i| (full[i].bbox, full[i].ciss_score)).collect();
        for k in greedy_nms(&items, 0.3) {
            keep[idx[k]] = true;
        }
    }
    for (r, k) in full.iter().zip(&keep) {
        if *k {
            want.push(r.clone());
        }
    }
    assert_eq!(pre, want);
    assert!(pre.len() < full.len());
}

#[test]
fn eval_reports() {
    let dir = tempfile::tempdir().unwrap();
    dataset(dir.path(), 16);
    let data = dir.path().join("data");
    let gts = read_ground_truth(&data.join("annotations.jsonl")).unwrap();

    // perfect detections
    let perfect: Vec<Detection> = gts
        .iter()
        .map(|g| Detection::new(g.image_id.clone(), g.category.clone(), g.bbox, 0.9))
        .collect();
    write_detections(&dir.path().join("perfect.jsonl"), &perfect).unwrap();
    let cfg = write_config(
        dir.path(),
        "e.json",
        json!({"annotations": "data/annotations.jsonl", "detections": "perfect.jsonl", "output": "perfect.json"}),
    );
    run_ok(&["eval", "-c", cfg.to_str().unwrap()]);
    let rep: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("perfect.json")).unwrap()).unwrap();
    assert_eq!(rep["mean_ap"], json!(1.0));
    assert_eq!(rep["mean_f"], json!(1.0));
    assert!(dir.path().join("perfect.pr.csv").exists());

    // rescored CSV: three columns side by side, ignore-loc-sim never below all-errors
    let cfg = write_config(
        dir.path(),
        "r.json",
        json!({"model": "model.json", "images_dir": "data/images", "detections": "data/detections.jsonl",
               "output": "all.csv"}),
    );
    run_ok(&["rescore", "-c", cfg.to_str().unwrap()]);
    let report = |name: &str, extra: &[&str]| {
        let cfg = write_config(
            dir.path(),
            &format!("{name}.json"),
            json!({"annotations": "data/annotations.jsonl", "rescored": "all.csv", "output": format!("{name}.out.json")}),
        );
        let mut args = vec!["eval", "-c", cfg.to_str().unwrap()];
        args.extend_from_slice(extra);
        run_ok(&args);
        serde_json::from_str::<Value>(&fs::read_to_string(dir.path().join(format!("{name}.out.json"))).unwrap()).unwrap()
    };
    let all = report("all", &[]);
    let ign = report("ign", &["--ignore-loc-sim"]);
    let voc = report("voc", &["--ap-mode", "voc07"]);
    for col in ["base_score", "revised_base", "ciss_score"] {
        assert!(all[col]["mean_ap"].is_number());
        assert!(voc[col]["mean_ap"].is_number());
        for (cat, r) in all[col]["per_category"].as_object().unwrap() {
            let a = r["ap"].as_f64().unwrap();
            let b = ign[col]["per_category"][cat]["ap"].as_f64().unwrap();
            assert!(b >= a, "{col} {cat}: {b} < {a}");
        }
    }
}

#[test]
fn eval_toy_case_and_missing_category() {
    let dir = tempfile::tempdir().unwrap();
    let g = |x: u32| GroundTruth {
        image_id: "a".into(),
        category: "car".into(),
        bbox: BBox::new(x, 0, 10, 10),
        difficult: false,
    };
    write_ground_truth(&dir.path().join("gt.jsonl"), &[g(0), g(50)]).unwrap();
    let d = |x: u32, s: f64, c: &str| Detection::new("a", c, BBox::new(x, 0, 10, 10), s);
    write_detections(
        &dir.path().join("d.jsonl"),
        &[d(0, 0.9, "car"), d(25, 0.8, "car"), d(50, 0.7, "car"), d(80, 0.5, "boat")],
    )
    .unwrap();
    let cfg = write_config(
        dir.path(),
        "e.json",
        json!({"annotations": "gt.jsonl", "detections": "d.jsonl", "output": "r.json"}),
    );
    let out = run_ok(&["eval", "-c", cfg.to_str().unwrap()]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("boat"));
    let rep: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    let ap = rep["per_category"]["car"]["ap"].as_f64().unwrap();
    assert!((ap - 5.0 / 6.0).abs() < 1e-12);
    assert!(rep["per_category"]["boat"]["ap"].is_null());
    assert!((rep["per_category"]["car"]["f_best"].as_f64().unwrap() - 0.8).abs() < 1e-12);
}

#[test]
fn synth_manifest_regenerates_scenes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.json", json!({"output": "out"}));
    run_ok(&["synth", "-c", cfg.to_str().unwrap(), "-n", "3", "--seed", "11"]);
    let out = dir.path().join("out");
    let m: Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let seeds = m["seeds"].as_array().unwrap();
    assert_eq!(seeds.len(), 3);
    let synth_cfg: ciss::synth::SynthConfig = serde_json::from_value(m["synth"].clone()).unwrap();
    let gts = read_ground_truth(&out.join("annotations.jsonl")).unwrap();
    for (s, id) in seeds.iter().zip(m["image_ids"].as_array().unwrap()) {
        let scene = generate_scene(&synth_cfg, s.as_u64().unwrap()).unwrap();
        let id = id.as_str().unwrap();
        assert_eq!(scene.image_id, id);
        assert_eq!(fs::read(out.join("images").join(format!("{id}.ppm"))).unwrap(), scene.image.to_ppm());
        let mine: Vec<GroundTruth> = gts.iter().filter(|g| g.image_id == id).cloned().collect();
        assert_eq!(mine, scene.ground_truth());
    }
    let _ = TextureSource::default();
}
