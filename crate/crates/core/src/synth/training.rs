use std::collections::BTreeMap;

use super::detector::{background_box, NoiseConfig};
use super::rng::SynthRng;
use super::scene::{Scene, SynthConfig};
use crate::error::Result;
use crate::features::{compute_channel_stack, describe_patch, patch_distance, DistanceParams, IntegralStack, TextureSource};
use crate::geom::BBox;
use crate::model::{PairSample, PatchRecord};

/// Annotated patches of one scene and every within-scene pair.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingSet {
    pub pairs: Vec<PairSample>,
    pub patches: Vec<PatchRecord>,
}

impl TrainingSet {
    pub fn extend(&mut self, other: TrainingSet) {
        self.pairs.extend(other.pairs);
        self.patches.extend(other.patches);
    }
}

/// Samples every planted instance plus as many background patches, scores each for
/// every category with the simulated detector, and pairs them up per category.
pub fn training_samples(
    scene: &Scene,
    cfg: &SynthConfig,
    noise: &NoiseConfig,
    params: &DistanceParams,
    texture: &TextureSource,
    seed: u64,
) -> Result<TrainingSet> {
    let mut rng = SynthRng::derive(seed, 0x7A1);
    let mut boxes: Vec<(BBox, Option<usize>)> = scene.instances.iter().enumerate().map(|(i, s)| (s.bbox, Some(i))).collect();
    if !cfg.categories.is_empty() {
        for _ in 0..scene.instances.len().max(2) {
            let c = rng.below(cfg.categories.len() as u64) as usize;
            if let Some(b) = background_box(scene, cfg, c, &mut rng) {
                boxes.push((b, None));
            }
        }
    }

    let mut patches = Vec::with_capacity(boxes.len());
    for (_, inst) in &boxes {
        let inst = inst.map(|i| &scene.instances[i]);
        let mut scores = BTreeMap::new();
        for style in &cfg.categories {
            let label = inst.is_some_and(|i| i.category == style.name);
            let occluded = label && inst.is_some_and(|i| i.occluded);
            scores.insert(style.name.clone(), noise.draw(label, occluded, &mut rng));
        }
        patches.push(PatchRecord {
            categories: inst.map(|i| vec![i.category.clone()]).unwrap_or_default(),
            scores,
        });
    }

    let cs = compute_channel_stack(&scene.image, texture)?;
    let is = IntegralStack::build(&cs);
    let descs = boxes
        .iter()
        .map(|(b, _)| describe_patch(&is, b, params.pyramid.enabled))
        .collect::<Result<Vec<_>>>()?;

    let mut pairs = Vec::new();
    for i in 0..boxes.len() {
        for j in i + 1..boxes.len() {
            let d = patch_distance(&descs[i], &descs[j], params)?;
            let same = patches[i].categories == patches[j].categories;
            for style in &cfg.categories {
                let lab = |p: &PatchRecord| u8::from(p.categories.contains(&style.name));
                pairs.push(PairSample {
                    distance: d,
                    s1: patches[i].scores[&style.name],
                    s2: patches[j].scores[&style.name],
                    l1: lab(&patches[i]),
                    l2: lab(&patches[j]),
                    same_label: same,
                });
            }
        }
    }
    Ok(TrainingSet { pairs, patches })
}
