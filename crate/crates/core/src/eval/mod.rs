//! VOC-style evaluation: greedy matching with optional error-mode filtering,
//! precision/recall, AP, best F-score, and greedy NMS.

mod matching;
mod metrics;
mod nms;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::geom::BBox;

pub use matching::{match_detections, DetLabel, ErrorFilterConfig, ErrorMode};
pub use metrics::{average_precision, pr_ap_f, ApMode, PrCurve, PrPoint, PrResult};
pub use nms::greedy_nms;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub image_id: String,
    pub category: String,
    pub bbox: BBox,
    #[serde(default)]
    pub difficult: bool,
}

/// A detection as seen by the evaluator.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredBox {
    pub image_id: String,
    pub category: String,
    pub bbox: BBox,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub iou_thresh: f64,
    pub filter: ErrorFilterConfig,
    pub ap_mode: ApMode,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            iou_thresh: 0.5,
            filter: ErrorFilterConfig::default(),
            ap_mode: ApMode::Area,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryReport {
    pub ap: Option<f64>,
    pub f_best: f64,
    pub n_gt: usize,
    /// `[threshold, precision, recall]` per ranked detection.
    pub pr: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_category: BTreeMap<String, CategoryReport>,
    pub mean_ap: Option<f64>,
    pub mean_f: Option<f64>,
    /// Categories detected but absent from the ground truth; their AP is undefined.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub missing_gt: Vec<String>,
}

/// Matches all detections and summarizes every category seen in either input.
pub fn evaluate(dets: &[ScoredBox], gts: &[GroundTruth], cfg: &EvalConfig) -> EvalReport {
    let labels = match_detections(dets, gts, cfg.iou_thresh, &cfg.filter);
    let categories: BTreeSet<&str> = dets
        .iter()
        .map(|d| d.category.as_str())
        .chain(gts.iter().map(|g| g.category.as_str()))
        .collect();
    let mut per_category = BTreeMap::new();
    let mut missing_gt = Vec::new();
    for cat in categories {
        let (cat_labels, cat_scores): (Vec<DetLabel>, Vec<f64>) = dets
            .iter()
            .zip(&labels)
            .filter(|(d, _)| d.category == cat)
            .map(|(d, l)| (*l, d.score))
            .unzip();
        let n_gt = gts.iter().filter(|g| g.category == cat && !g.difficult).count();
        if n_gt == 0 {
            missing_gt.push(cat.to_string());
        }
        let res = pr_ap_f(&cat_labels, &cat_scores, n_gt, cfg.ap_mode);
        per_category.insert(
            cat.to_string(),
            CategoryReport {
                ap: res.ap,
                f_best: res.f_best,
                n_gt,
                pr: res
                    .curve
                    .points
                    .iter()
                    .map(|p| [p.threshold, p.precision, p.recall])
                    .collect(),
            },
        );
    }
    let aps: Vec<f64> = per_category.values().filter_map(|c| c.ap).collect();
    let fs: Vec<f64> = per_category.values().filter(|c| c.n_gt > 0).map(|c| c.f_best).collect();
    let avg = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    EvalReport {
        mean_ap: avg(&aps),
        mean_f: avg(&fs),
        per_category,
        missing_gt,
    }
}
