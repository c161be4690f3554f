use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::detector::{simulate_base_scores, NoiseConfig};
use super::rng::SynthRng;
use super::scene::{generate_scene, SynthConfig};
use super::training::{training_samples, TrainingSet};
use crate::error::Result;
use crate::eval::{evaluate, EvalConfig, EvalReport, GroundTruth, ScoredBox};
use crate::features::{DistanceParams, TextureSource};
use crate::model::{default_edges, fit_model, FitReport, DEFAULT_MIN_COUNT};
use crate::rescore::{rescore_image, AnchorRule, Detection, RescoreConfig, ScoreProvider, DEFAULT_LOOKUP_IOU};
use crate::search::SearchConfig;

/// Train-then-test experiment on synthetic scenes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkConfig {
    pub synth: SynthConfig,
    pub noise: NoiseConfig,
    pub distance: DistanceParams,
    pub search: SearchConfig,
    pub anchors: AnchorRule,
    pub eval: EvalConfig,
    pub n_train: usize,
    pub n_test: usize,
    pub lookup_iou: f64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            synth: SynthConfig::default(),
            noise: NoiseConfig::default(),
            distance: DistanceParams::default(),
            search: SearchConfig::default(),
            anchors: AnchorRule::default(),
            eval: EvalConfig::default(),
            n_train: 500,
            n_test: 100,
            lookup_iou: DEFAULT_LOOKUP_IOU,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchmarkOutcome {
    pub fit: FitReport,
    pub training: TrainingSet,
    pub detections: Vec<Detection>,
    pub ground_truth: Vec<GroundTruth>,
    pub base: EvalReport,
    pub revised: EvalReport,
    pub ciss: EvalReport,
}

/// Scene seeds for one split; train and test streams never collide.
pub fn split_seeds(seed: u64, split: u64, n: usize) -> Vec<u64> {
    let mut g = SynthRng::derive(seed, 0xB0_0000 + split);
    (0..n).map(|_| g.next_u64()).collect()
}

/// Collects training pairs and patches from `seeds`, in seed order.
pub fn collect_training(
    seeds: &[u64],
    synth: &SynthConfig,
    noise: &NoiseConfig,
    distance: &DistanceParams,
    texture: &TextureSource,
) -> Result<TrainingSet> {
    let parts = seeds
        .par_iter()
        .map(|&s| {
            let scene = generate_scene(synth, s)?;
            training_samples(&scene, synth, noise, distance, texture, s)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut all = TrainingSet::default();
    for p in parts {
        all.extend(p);
    }
    Ok(all)
}

fn scored(dets: &[Detection], pick: impl Fn(&Detection) -> f64) -> Vec<ScoredBox> {
    dets.iter()
        .map(|d| ScoredBox {
            image_id: d.image_id.clone(),
            category: d.category.clone(),
            bbox: d.bbox,
            score: pick(d),
        })
        .collect()
}

/// Fits a model on `n_train` scenes, rescores `n_test` fresh scenes with
/// detection-lookup supporter scores, and evaluates the three score columns on
/// unclamped estimates.
pub fn run_benchmark(cfg: &BenchmarkConfig, seed: u64) -> Result<BenchmarkOutcome> {
    cfg.noise.validate()?;
    cfg.search.validate()?;
    let texture = TextureSource::default();
    let training = collect_training(&split_seeds(seed, 0, cfg.n_train), &cfg.synth, &cfg.noise, &cfg.distance, &texture)?;
    let fit = fit_model(
        &training.pairs,
        &training.patches,
        &default_edges(),
        DEFAULT_MIN_COUNT,
        cfg.distance,
    )?;
    let rcfg = RescoreConfig {
        anchors: cfg.anchors,
        search: cfg.search.clone(),
        texture,
    };
    let per_scene = split_seeds(seed, 1, cfg.n_test)
        .par_iter()
        .map(|&s| {
            let scene = generate_scene(&cfg.synth, s)?;
            let dets = simulate_base_scores(&scene, &cfg.synth, &cfg.noise, s);
            let sp = ScoreProvider::lookup(
                dets.iter().map(|d| (d.category.clone(), d.bbox, d.base_score)).collect(),
                cfg.lookup_iou,
            )?;
            let out = rescore_image(&scene.image, &dets, &fit.model, &sp, &rcfg)?;
            Ok((out, scene.ground_truth()))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut detections = Vec::new();
    let mut ground_truth = Vec::new();
    for (d, g) in per_scene {
        detections.extend(d);
        ground_truth.extend(g);
    }
    let raw = |e: Option<crate::rescore::Estimate>, d: &Detection| e.map_or(d.base_score, |e| e.raw);
    Ok(BenchmarkOutcome {
        base: evaluate(&scored(&detections, |d| d.base_score), &ground_truth, &cfg.eval),
        revised: evaluate(&scored(&detections, |d| raw(d.revised, d)), &ground_truth, &cfg.eval),
        ciss: evaluate(&scored(&detections, |d| raw(d.ciss, d)), &ground_truth, &cfg.eval),
        fit,
        training,
        detections,
        ground_truth,
    })
}
