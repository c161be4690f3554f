use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ciss::eval::{evaluate, EvalConfig, EvalReport, ScoredBox};
use ciss::formats::{read_detections, read_ground_truth, read_rescore_csv, ScoreColumn};

use crate::config::RunConfig;
use crate::error::{write_err, CliResult};

fn pr_dump(reports: &BTreeMap<String, EvalReport>) -> String {
    let mut s = String::from("column,category,threshold,precision,recall\n");
    for (col, r) in reports {
        for (cat, c) in &r.per_category {
            for [t, p, rc] in &c.pr {
                let _ = writeln!(s, "{col},{cat},{t},{p},{rc}");
            }
        }
    }
    s
}

fn summarize(col: &str, r: &EvalReport) {
    let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.4}"));
    println!("{col}: mean_ap={} mean_f={}", fmt(r.mean_ap), fmt(r.mean_f));
    for c in &r.missing_gt {
        eprintln!("note: category {c:?} has detections but no ground truth; AP undefined");
    }
}

pub fn evaluate_all(cfg: &RunConfig, eval: &EvalConfig) -> CliResult<BTreeMap<String, EvalReport>> {
    let gts = read_ground_truth(RunConfig::require(&cfg.annotations, "annotations")?)?;
    let mut reports = BTreeMap::new();
    if let Some(csv) = &cfg.rescored {
        let rows = read_rescore_csv(csv)?;
        for col in ScoreColumn::ALL {
            let dets: Vec<ScoredBox> = rows.iter().map(|r| r.scored(col)).collect();
            reports.insert(col.name().to_string(), evaluate(&dets, &gts, eval));
        }
    } else {
        let dets: Vec<ScoredBox> = read_detections(RunConfig::require(&cfg.detections, "detections")?)?
            .into_iter()
            .map(|d| ScoredBox {
                image_id: d.image_id,
                category: d.category,
                bbox: d.bbox,
                score: d.base_score,
            })
            .collect();
        reports.insert("score".to_string(), evaluate(&dets, &gts, eval));
    }
    Ok(reports)
}

pub fn pr_path(report: &Path) -> std::path::PathBuf {
    report.with_extension("pr.csv")
}

pub fn run(cfg: &RunConfig, eval: &EvalConfig) -> CliResult<()> {
    let out = RunConfig::require(&cfg.output, "output")?;
    let reports = evaluate_all(cfg, eval)?;
    for (col, r) in &reports {
        summarize(col, r);
    }
    let json = if cfg.rescored.is_some() {
        serde_json::to_string_pretty(&reports)
    } else {
        serde_json::to_string_pretty(&reports["score"])
    }
    .expect("reports serialize");
    fs::write(out, json + "\n").map_err(write_err(out))?;
    let pr = pr_path(out);
    fs::write(&pr, pr_dump(&reports)).map_err(write_err(&pr))?;
    Ok(())
}
