//! Anchor rescoring: supporter search, supporter scores, covariance system and
//! MMSE estimate for every detection of an image.

mod provider;
mod system;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::features::{compute_channel_stack, describe_patch, patch_distance, IntegralStack, TextureSource};
use crate::geom::BBox;
use crate::image::Image;
use crate::model::DependencyModel;
use crate::search::{find_supporters, SearchConfig, Supporter};

pub use provider::{supporter_score_lookup, ScoreProvider, ScoreRaster, DEFAULT_LOOKUP_IOU};
pub use system::{
    build_covariance_system, rescore_anchor, residual_inf, revised_base, solve_mmse, Estimate, MmseSolution,
    MmseSystem, RESIDUAL_TOL,
};

/// One base-detector candidate and the scores derived for it.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub image_id: String,
    pub category: String,
    pub bbox: BBox,
    pub base_score: f64,
    pub revised: Option<Estimate>,
    pub ciss: Option<Estimate>,
    pub is_anchor: bool,
    pub n_supporters: usize,
    /// The CISS estimate fell back to the revised base-score.
    pub fallback: bool,
}

impl Detection {
    pub fn new(image_id: impl Into<String>, category: impl Into<String>, bbox: BBox, base_score: f64) -> Self {
        Detection {
            image_id: image_id.into(),
            category: category.into(),
            bbox,
            base_score,
            revised: None,
            ciss: None,
            is_anchor: false,
            n_supporters: 0,
            fallback: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnchorRule {
    /// Anchors need a base-score strictly above this.
    pub min_score: f64,
    /// Anchors need both sides strictly longer than this.
    pub min_side: u32,
}

impl Default for AnchorRule {
    fn default() -> Self {
        AnchorRule {
            min_score: 0.05,
            min_side: 15,
        }
    }
}

impl AnchorRule {
    pub fn is_anchor(&self, score: f64, bbox: &BBox) -> bool {
        score > self.min_score && bbox.min_side() > self.min_side
    }
}

#[derive(Debug, Clone, Default)]
pub struct RescoreConfig {
    pub anchors: AnchorRule,
    pub search: SearchConfig,
    pub texture: TextureSource,
}

struct AnchorOutcome {
    estimate: Estimate,
    n_supporters: usize,
    fallback: bool,
}

fn score_anchor(
    is: &IntegralStack,
    det: &Detection,
    model: &DependencyModel,
    sp: &ScoreProvider,
    cfg: &RescoreConfig,
) -> Result<AnchorOutcome> {
    let mut supporters: Vec<Supporter> = find_supporters(is, &det.bbox, &model.distance, &cfg.search)?;
    for s in supporters.iter_mut() {
        s.score = Some(supporter_score_lookup(sp, &s.bbox, &det.category)?);
    }
    let pyramid = model.distance.pyramid.enabled;
    let descriptors = supporters
        .iter()
        .map(|s| describe_patch(is, &s.bbox, pyramid))
        .collect::<Result<Vec<_>>>()?;
    let n = supporters.len();
    let mut pairwise = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = patch_distance(&descriptors[i], &descriptors[j], &model.distance)?;
            pairwise[i][j] = d;
            pairwise[j][i] = d;
        }
    }
    let sys = build_covariance_system(det.base_score, &det.category, &supporters, &pairwise, model)?;
    let sol = solve_mmse(&sys);
    Ok(AnchorOutcome {
        estimate: rescore_anchor(&sys, &sol.coefficients),
        n_supporters: n,
        fallback: sol.fallback,
    })
}

/// Rescores every detection of one image, preserving input order.
///
/// Every detection gets its revised base-score; anchors additionally get the
/// supporter-based estimate, non-anchors reuse the revised base-score. A failure
/// on one anchor sets its `fallback` flag instead of failing the image.
pub fn rescore_image(
    img: &Image,
    detections: &[Detection],
    model: &DependencyModel,
    sp: &ScoreProvider,
    cfg: &RescoreConfig,
) -> Result<Vec<Detection>> {
    model.validate()?;
    sp.check_dims(img.width(), img.height())?;
    let cs = compute_channel_stack(img, &cfg.texture)?;
    let is = IntegralStack::build(&cs);
    Ok(detections
        .par_iter()
        .map(|det| {
            let mut out = det.clone();
            let revised = revised_base(model, &det.category, det.base_score);
            out.revised = Some(revised);
            out.is_anchor = cfg.anchors.is_anchor(det.base_score, &det.bbox);
            out.n_supporters = 0;
            out.fallback = false;
            out.ciss = Some(revised);
            if out.is_anchor {
                match score_anchor(&is, det, model, sp, cfg) {
                    Ok(o) => {
                        out.ciss = Some(o.estimate);
                        out.n_supporters = o.n_supporters;
                        out.fallback = o.fallback;
                    }
                    Err(e) => {
                        warn!("{} {} {}: {e}; using revised base-score", det.image_id, det.category, det.bbox);
                        out.fallback = true;
                    }
                }
            }
            out
        })
        .collect())
}
