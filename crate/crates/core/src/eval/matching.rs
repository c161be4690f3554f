use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{GroundTruth, ScoredBox};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DetLabel {
    Tp,
    Fp,
    Ignored,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorMode {
    AllErrors,
    IgnoreLocSim,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ErrorFilterConfig {
    pub mode: ErrorMode,
    /// A would-be false positive overlapping a same-category object by at least
    /// the lower bound is a localization error (duplicates of a claimed object included).
    pub loc_iou_band: [f64; 2],
    pub similarity_groups: BTreeMap<String, Vec<String>>,
}

impl Default for ErrorFilterConfig {
    fn default() -> Self {
        let group = |names: &[&str]| names.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        ErrorFilterConfig {
            mode: ErrorMode::AllErrors,
            loc_iou_band: [0.1, 0.5],
            similarity_groups: [
                ("animals".to_string(), group(&["bird", "cat", "cow", "dog", "horse", "sheep", "person"])),
                ("vehicles".to_string(), group(&["plane", "bike", "boat", "bus", "car", "motorbike", "train"])),
                ("furniture".to_string(), group(&["chair", "table", "sofa"])),
            ]
            .into(),
        }
    }
}

impl ErrorFilterConfig {
    pub fn similar(&self, a: &str, b: &str) -> bool {
        a != b
            && self
                .similarity_groups
                .values()
                .any(|g| g.iter().any(|c| c == a) && g.iter().any(|c| c == b))
    }
}

/// Labels each detection TP, FP or IGNORED.
///
/// Detections are visited by descending score (ties by input index). Each takes
/// the unclaimed same-category object of maximal IoU; at `iou_thresh` or more it is
/// a TP and claims the object, or IGNORED if the object is `difficult`. Otherwise it
/// is a FP, unless `filter` ignores localization and similar-object errors.
pub fn match_detections(
    dets: &[ScoredBox],
    gts: &[GroundTruth],
    iou_thresh: f64,
    filter: &ErrorFilterConfig,
) -> Vec<DetLabel> {
    let mut by_image: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, g) in gts.iter().enumerate() {
        by_image.entry(g.image_id.as_str()).or_default().push(i);
    }
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].score.total_cmp(&dets[a].score).then(a.cmp(&b)));

    let mut claimed = vec![false; gts.len()];
    let mut labels = vec![DetLabel::Fp; dets.len()];
    let empty = Vec::new();
    for i in order {
        let d = &dets[i];
        let in_image = by_image.get(d.image_id.as_str()).unwrap_or(&empty);
        let mut best: Option<(usize, f64)> = None;
        let mut overlap_any = 0.0f64;
        for &g in in_image {
            let gt = &gts[g];
            if gt.category != d.category {
                continue;
            }
            let iou = gt.bbox.iou(&d.bbox);
            overlap_any = overlap_any.max(iou);
            if !claimed[g] && best.is_none_or(|(_, b)| iou > b) {
                best = Some((g, iou));
            }
        }
        labels[i] = match best {
            Some((g, iou)) if iou >= iou_thresh => {
                if gts[g].difficult {
                    DetLabel::Ignored
                } else {
                    claimed[g] = true;
                    DetLabel::Tp
                }
            }
            _ if filter.mode == ErrorMode::IgnoreLocSim => {
                let lo = filter.loc_iou_band[0];
                let similar_hit = in_image.iter().any(|&g| {
                    let gt = &gts[g];
                    filter.similar(&gt.category, &d.category) && gt.bbox.iou(&d.bbox) >= lo
                });
                if overlap_any >= lo || similar_hit {
                    DetLabel::Ignored
                } else {
                    DetLabel::Fp
                }
            }
            _ => DetLabel::Fp,
        };
    }
    labels
}
