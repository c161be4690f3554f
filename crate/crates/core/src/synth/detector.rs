use serde::{Deserialize, Serialize};

use super::rng::SynthRng;
use super::scene::{box_dims, place_box, Scene, SynthConfig, PER_BOX_TRIES};
use crate::error::{Error, Result};
use crate::geom::BBox;
use crate::rescore::Detection;

/// Simulated base detector: `s = clamp01(μ_l + σ·g + penalty·occluded)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    pub mu1: f64,
    pub mu0: f64,
    pub sigma: f64,
    pub occlusion_penalty: f64,
    /// Expected number of false alarms per image.
    pub clutter_rate: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            mu1: 0.8,
            mu0: 0.2,
            sigma: 0.15,
            occlusion_penalty: -0.4,
            clutter_rate: 2.0,
        }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu1 > self.mu0) {
            return Err(Error::InvalidArgument("noise config needs mu1 > mu0".into()));
        }
        if !(self.sigma >= 0.0) || !(self.clutter_rate >= 0.0) {
            return Err(Error::InvalidArgument("sigma and clutter rate must be >= 0".into()));
        }
        Ok(())
    }

    pub fn draw(&self, label: bool, occluded: bool, rng: &mut SynthRng) -> f64 {
        let mu = if label { self.mu1 } else { self.mu0 };
        let g = rng.gaussian();
        let pen = if occluded { self.occlusion_penalty } else { 0.0 };
        (mu + self.sigma * g + pen).clamp(0.0, 1.0)
    }
}

/// Integer count with expectation `rate`: the integer part plus a Bernoulli remainder.
fn draw_count(rate: f64, rng: &mut SynthRng) -> usize {
    let whole = rate.floor();
    whole as usize + usize::from(rng.bernoulli(rate - whole))
}

/// Places a box shaped like `category` on background, away from every instance.
pub(crate) fn background_box(
    scene: &Scene,
    cfg: &SynthConfig,
    category: usize,
    rng: &mut SynthRng,
) -> Option<BBox> {
    let style = &cfg.categories[category];
    let short = rng.uniform(cfg.short_side[0] as f64, cfg.short_side[1] as f64 + 1.0).floor();
    let (w, h) = box_dims(style, short);
    let taken: Vec<BBox> = scene.instances.iter().map(|i| i.bbox).collect();
    place_box(w, h, &taken, 0.0, PER_BOX_TRIES * 10, cfg, rng)
}

/// One detection per planted instance plus background false alarms.
pub fn simulate_base_scores(scene: &Scene, cfg: &SynthConfig, noise: &NoiseConfig, seed: u64) -> Vec<Detection> {
    let mut rng = SynthRng::derive(seed, 0x5C0E);
    let mut out: Vec<Detection> = scene
        .instances
        .iter()
        .map(|inst| {
            let s = noise.draw(true, inst.occluded, &mut rng);
            Detection::new(scene.image_id.clone(), inst.category.clone(), inst.bbox, s)
        })
        .collect();
    if cfg.categories.is_empty() {
        return out;
    }
    let n = draw_count(noise.clutter_rate, &mut rng);
    for _ in 0..n {
        let c = rng.below(cfg.categories.len() as u64) as usize;
        if let Some(b) = background_box(scene, cfg, c, &mut rng) {
            let s = noise.draw(false, false, &mut rng);
            out.push(Detection::new(scene.image_id.clone(), cfg.categories[c].name.clone(), b, s));
        }
    }
    out
}
