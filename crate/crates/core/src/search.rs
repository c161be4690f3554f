//! Greedy supporter search: the most similar, mutually non-overlapping regions of
//! roughly the anchor's size.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{
    compute_channel_stack, describe_patch, BoxSums, DistanceParams, IntegralStack, PatchDescriptor,
    TextureSource,
};
use crate::features::{descriptor_unchecked, distance_unchecked};
use crate::geom::BBox;
use crate::image::Image;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub n_max: usize,
    pub d_max: f64,
    /// Multipliers applied to both anchor sides.
    pub scales: Vec<f64>,
    pub stride: u32,
    /// Two boxes conflict when their IoU exceeds this; 0 forbids any intersection.
    pub max_overlap_iou: f64,
    pub min_side: u32,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            n_max: 5,
            d_max: 0.25,
            scales: vec![0.8, 0.9, 1.0, 1.1, 1.2],
            stride: 4,
            max_overlap_iou: 0.0,
            min_side: 15,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.d_max >= 0.0) {
            return Err(Error::InvalidArgument("d_max must be non-negative".into()));
        }
        if self.stride == 0 {
            return Err(Error::InvalidArgument("stride must be at least 1".into()));
        }
        if self.scales.iter().any(|s| !(0.8..=1.2).contains(s)) {
            return Err(Error::InvalidArgument("scales must lie in [0.8, 1.2]".into()));
        }
        if !(0.0..1.0).contains(&self.max_overlap_iou) {
            return Err(Error::InvalidArgument("max_overlap_iou must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Supporter {
    pub bbox: BBox,
    pub distance: f64,
    /// Base-score for the anchor's category, filled in by the rescoring stage.
    pub score: Option<f64>,
}

/// One candidate window, ordered by (distance, y, x, scale index).
#[derive(Debug, Clone, Copy)]
struct Candidate {
    bbox: BBox,
    scale: usize,
    distance: f64,
}

fn rank(a: &Candidate, b: &Candidate) -> Ordering {
    a.distance
        .total_cmp(&b.distance)
        .then(a.bbox.y.cmp(&b.bbox.y))
        .then(a.bbox.x.cmp(&b.bbox.x))
        .then(a.scale.cmp(&b.scale))
}

fn check_anchor(width: usize, height: usize, anchor: &BBox, cfg: &SearchConfig) -> Result<()> {
    cfg.validate()?;
    if !anchor.fits_in(width, height) {
        return Err(Error::OutOfBounds {
            bbox: *anchor,
            width,
            height,
        });
    }
    if anchor.min_side() < cfg.min_side {
        return Err(Error::AnchorTooSmall(*anchor));
    }
    Ok(())
}

/// Every stride-aligned in-bounds window at every scale, as (box, scale index).
fn candidate_windows(width: usize, height: usize, anchor: &BBox, cfg: &SearchConfig) -> Vec<(BBox, usize)> {
    let mut out = Vec::new();
    for (si, s) in cfg.scales.iter().enumerate() {
        let w = (s * anchor.w as f64).round() as usize;
        let h = (s * anchor.h as f64).round() as usize;
        if w == 0 || h == 0 || w > width || h > height {
            continue;
        }
        for y in (0..=height - h).step_by(cfg.stride as usize) {
            for x in (0..=width - w).step_by(cfg.stride as usize) {
                out.push((BBox::new(x as u32, y as u32, w as u32, h as u32), si));
            }
        }
    }
    out
}

fn conflicts(a: &BBox, b: &BBox, max_iou: f64) -> bool {
    a.iou(b) > max_iou
}

fn search_with<S: BoxSums + Sync>(
    src: &S,
    anchor: &BBox,
    params: &DistanceParams,
    cfg: &SearchConfig,
) -> Vec<Supporter> {
    if cfg.n_max == 0 {
        return Vec::new();
    }
    let pyramid = params.pyramid.enabled;
    let reference = descriptor_unchecked(src, anchor, pyramid);
    let mut candidates: Vec<Candidate> = candidate_windows(src.width(), src.height(), anchor, cfg)
        .into_par_iter()
        .filter(|(b, _)| !conflicts(b, anchor, cfg.max_overlap_iou))
        .filter_map(|(bbox, scale)| {
            let d = descriptor_unchecked(src, &bbox, pyramid);
            let distance = distance_unchecked(&reference, &d, params);
            (distance <= cfg.d_max).then_some(Candidate {
                bbox,
                scale,
                distance,
            })
        })
        .collect();
    candidates.sort_by(rank);

    let mut chosen: Vec<Supporter> = Vec::with_capacity(cfg.n_max);
    for c in candidates {
        if chosen.len() == cfg.n_max {
            break;
        }
        if chosen
            .iter()
            .all(|s| !conflicts(&c.bbox, &s.bbox, cfg.max_overlap_iou))
        {
            chosen.push(Supporter {
                bbox: c.bbox,
                distance: c.distance,
                score: None,
            });
        }
    }
    chosen
}

/// Finds up to `n_max` supporters for `anchor`, sorted by ascending distance.
pub fn find_supporters(
    is: &IntegralStack,
    anchor: &BBox,
    params: &DistanceParams,
    cfg: &SearchConfig,
) -> Result<Vec<Supporter>> {
    check_anchor(is.width(), is.height(), anchor, cfg)?;
    params.validate()?;
    Ok(search_with(is, anchor, params, cfg))
}

/// Reference search for tests: describes every window by direct per-pixel
/// summation and selects supporters one at a time by a full scan.
pub fn find_supporters_bruteforce(
    img: &Image,
    texture: &TextureSource,
    anchor: &BBox,
    params: &DistanceParams,
    cfg: &SearchConfig,
) -> Result<Vec<Supporter>> {
    check_anchor(img.width(), img.height(), anchor, cfg)?;
    params.validate()?;
    let cs = compute_channel_stack(img, texture)?;
    let pyramid = params.pyramid.enabled;
    let reference = describe_patch(&cs, anchor, pyramid)?;
    let scored: Vec<Candidate> = candidate_windows(img.width(), img.height(), anchor, cfg)
        .into_iter()
        .map(|(bbox, scale)| {
            let d: PatchDescriptor = describe_patch(&cs, &bbox, pyramid)?;
            Ok(Candidate {
                bbox,
                scale,
                distance: crate::features::patch_distance(&reference, &d, params)?,
            })
        })
        .collect::<Result<_>>()?;

    let mut chosen: Vec<Supporter> = Vec::new();
    while chosen.len() < cfg.n_max {
        let best = scored
            .iter()
            .filter(|c| c.distance <= cfg.d_max)
            .filter(|c| !conflicts(&c.bbox, anchor, cfg.max_overlap_iou))
            .filter(|c| chosen.iter().all(|s| !conflicts(&c.bbox, &s.bbox, cfg.max_overlap_iou)))
            .min_by(|a, b| rank(a, b));
        match best {
            Some(c) => chosen.push(Supporter {
                bbox: c.bbox,
                distance: c.distance,
                score: None,
            }),
            None => break,
        }
    }
    Ok(chosen)
}
