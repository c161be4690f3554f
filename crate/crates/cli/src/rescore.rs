use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use ciss::chanmap::ChannelMap;
use ciss::eval::greedy_nms;
use ciss::features::TextureSource;
use ciss::formats::{read_detections, write_rescore_csv, RescoreRow};
use ciss::model::{load_model, DependencyModel};
use ciss::rescore::{rescore_image, Detection, RescoreConfig, ScoreProvider};
use ciss::{load_image, Error, Image};
use log::{info, warn};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::error::CliResult;

fn find_image(dir: &Path, id: &str) -> ciss::Result<Image> {
    for ext in ["ppm", "png"] {
        let p = dir.join(format!("{id}.{ext}"));
        if p.exists() {
            return load_image(&p);
        }
    }
    Err(Error::NotFound(dir.join(format!("{id}.ppm"))))
}

/// Keeps the NMS survivors of every category, in input order.
pub fn nms_by(dets: Vec<Detection>, iou: f64, score: impl Fn(&Detection) -> f64) -> Vec<Detection> {
    let mut by_cat: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, d) in dets.iter().enumerate() {
        by_cat.entry(&d.category).or_default().push(i);
    }
    let mut keep = vec![false; dets.len()];
    for idx in by_cat.values() {
        let items: Vec<_> = idx.iter().map(|&i| (dets[i].bbox, score(&dets[i]))).collect();
        for k in greedy_nms(&items, iou) {
            keep[idx[k]] = true;
        }
    }
    dets.into_iter().zip(keep).filter_map(|(d, k)| k.then_some(d)).collect()
}

fn ciss_value(d: &Detection) -> f64 {
    d.ciss.or(d.revised).map_or(d.base_score, |e| e.value)
}

struct Inputs<'a> {
    cfg: &'a RunConfig,
    images: &'a Path,
    model: &'a DependencyModel,
    rcfg: RescoreConfig,
}

fn rescore_one(inp: &Inputs, id: &str, dets: Vec<Detection>) -> ciss::Result<Vec<Detection>> {
    let cfg = inp.cfg;
    let img = find_image(inp.images, id)?;
    let dets = if cfg.pre_nms {
        dets
    } else {
        nms_by(dets, cfg.nms_iou, |d| d.base_score)
    };
    let sp = match &cfg.score_rasters_dir {
        Some(dir) => {
            let cats: BTreeSet<&str> = dets.iter().map(|d| d.category.as_str()).collect();
            let mut maps = BTreeMap::new();
            for c in cats {
                let p: PathBuf = dir.join(id).join(format!("{c}.chan"));
                let m = ChannelMap::load(&p)?;
                if m.channels() != 1 {
                    return Err(Error::ChannelMismatch(format!("{} has {} channels, expected 1", p.display(), m.channels())));
                }
                maps.insert(c.to_string(), m);
            }
            ScoreProvider::dense(&maps)
        }
        None => ScoreProvider::lookup(
            dets.iter().map(|d| (d.category.clone(), d.bbox, d.base_score)).collect(),
            cfg.lookup_iou,
        )?,
    };
    let mut rcfg = inp.rcfg.clone();
    if let Some(dir) = &cfg.texture_maps_dir {
        rcfg.texture = TextureSource::Maps(ChannelMap::load(&dir.join(format!("{id}.chan")))?);
    }
    let out = rescore_image(&img, &dets, inp.model, &sp, &rcfg)?;
    Ok(if cfg.pre_nms {
        nms_by(out, cfg.nms_iou, ciss_value)
    } else {
        out
    })
}

pub fn run(cfg: &RunConfig) -> CliResult<()> {
    let model = load_model(RunConfig::require(&cfg.model, "model")?)?;
    let images = RunConfig::require(&cfg.images_dir, "images_dir")?;
    let dets = read_detections(RunConfig::require(&cfg.detections, "detections")?)?;
    let out = RunConfig::require(&cfg.output, "output")?;
    cfg.search.validate()?;

    let mut by_image: BTreeMap<String, Vec<Detection>> = BTreeMap::new();
    for d in dets {
        by_image.entry(d.image_id.clone()).or_default().push(d);
    }
    let inp = Inputs {
        cfg,
        images,
        model: &model,
        rcfg: RescoreConfig {
            anchors: cfg.anchors,
            search: cfg.search.clone(),
            texture: TextureSource::default(),
        },
    };
    let results: Vec<(String, ciss::Result<Vec<Detection>>)> = by_image
        .into_par_iter()
        .map(|(id, dets)| {
            let r = rescore_one(&inp, &id, dets);
            (id, r)
        })
        .collect();

    let mut rows = Vec::new();
    let mut skipped = 0usize;
    for (id, r) in &results {
        match r {
            Ok(dets) => rows.extend(dets.iter().map(RescoreRow::from_detection)),
            Err(e) => {
                warn!("skipping image {id}: {e}");
                skipped += 1;
            }
        }
    }
    write_rescore_csv(out, &rows)?;
    info!("wrote {} rows to {}", rows.len(), out.display());
    eprintln!(
        "rescored {} images ({} detections), skipped {skipped}",
        results.len() - skipped,
        rows.len()
    );
    Ok(())
}
