use std::fs;

use ciss::features::TextureSource;
use ciss::formats::{write_detections, write_ground_truth, write_jsonl};
use ciss::synth::{generate_scene, simulate_base_scores, split_seeds, training_samples, NoiseConfig, SynthConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{write_err, CliResult};

/// Everything needed to regenerate a dataset.
#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub n: usize,
    pub seeds: Vec<u64>,
    pub image_ids: Vec<String>,
    pub synth: SynthConfig,
    pub noise: NoiseConfig,
}

/// Stream id of dataset scene seeds.
const DATASET_SPLIT: u64 = 2;

pub fn run(cfg: &RunConfig, n: usize, seed: u64) -> CliResult<()> {
    let out = RunConfig::require(&cfg.output, "output")?;
    cfg.noise.validate()?;
    let images = out.join("images");
    fs::create_dir_all(&images).map_err(write_err(&images))?;

    let seeds = split_seeds(seed, DATASET_SPLIT, n);
    let texture = TextureSource::default();
    let scenes = seeds
        .par_iter()
        .map(|&s| {
            let scene = generate_scene(&cfg.synth, s)?;
            let dets = simulate_base_scores(&scene, &cfg.synth, &cfg.noise, s);
            let train = training_samples(&scene, &cfg.synth, &cfg.noise, &cfg.distance, &texture, s)?;
            Ok((scene, dets, train))
        })
        .collect::<ciss::Result<Vec<_>>>()?;

    let mut gts = Vec::new();
    let mut dets = Vec::new();
    let mut pairs = Vec::new();
    let mut patches = Vec::new();
    for (scene, d, t) in &scenes {
        let p = images.join(format!("{}.ppm", scene.image_id));
        fs::write(&p, scene.image.to_ppm()).map_err(write_err(&p))?;
        gts.extend(scene.ground_truth());
        dets.extend(d.iter().cloned());
        pairs.extend(t.pairs.iter().copied());
        patches.extend(t.patches.iter().cloned());
    }
    write_ground_truth(&out.join("annotations.jsonl"), &gts)?;
    write_detections(&out.join("detections.jsonl"), &dets)?;
    write_jsonl(&out.join("pairs.jsonl"), &pairs)?;
    write_jsonl(&out.join("patches.jsonl"), &patches)?;
    let manifest = Manifest {
        seed,
        n,
        seeds,
        image_ids: scenes.iter().map(|(s, _, _)| s.image_id.clone()).collect(),
        synth: cfg.synth.clone(),
        noise: cfg.noise,
    };
    let mp = out.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    fs::write(&mp, text).map_err(write_err(&mp))?;
    eprintln!("wrote {n} scenes to {}", out.display());
    Ok(())
}
