use std::fs;
use std::path::{Path, PathBuf};

use ciss::eval::EvalConfig;
use ciss::features::DistanceParams;
use ciss::model::DEFAULT_MIN_COUNT;
use ciss::rescore::{AnchorRule, DEFAULT_LOOKUP_IOU};
use ciss::search::SearchConfig;
use ciss::synth::{NoiseConfig, SynthConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Everything a subcommand may need. Relative paths resolve against the config
/// file's directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub images_dir: Option<PathBuf>,
    pub detections: Option<PathBuf>,
    pub annotations: Option<PathBuf>,
    /// Rescore CSV to evaluate instead of plain detections.
    pub rescored: Option<PathBuf>,
    pub pairs: Option<PathBuf>,
    pub patches: Option<PathBuf>,
    pub model: Option<PathBuf>,
    /// `<dir>/<image_id>.chan` per image.
    pub texture_maps_dir: Option<PathBuf>,
    /// `<dir>/<image_id>/<category>.chan` per image and category.
    pub score_rasters_dir: Option<PathBuf>,
    pub output: Option<PathBuf>,

    pub distance: DistanceParams,
    pub search: SearchConfig,
    pub anchors: AnchorRule,
    pub eval: EvalConfig,
    pub workers: usize,
    pub pre_nms: bool,
    pub nms_iou: f64,
    pub lookup_iou: f64,
    pub bin_edges: Option<Vec<f64>>,
    pub min_count: u64,
    pub synth: SynthConfig,
    pub noise: NoiseConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            images_dir: None,
            detections: None,
            annotations: None,
            rescored: None,
            pairs: None,
            patches: None,
            model: None,
            texture_maps_dir: None,
            score_rasters_dir: None,
            output: None,
            distance: DistanceParams::default(),
            search: SearchConfig::default(),
            anchors: AnchorRule::default(),
            eval: EvalConfig::default(),
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            pre_nms: false,
            nms_iou: 0.3,
            lookup_iou: DEFAULT_LOOKUP_IOU,
            bin_edges: None,
            min_count: DEFAULT_MIN_COUNT,
            synth: SynthConfig::default(),
            noise: NoiseConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let err = |msg: String| CliError::Config {
            path: path.to_path_buf(),
            msg,
        };
        let text = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let mut cfg: RunConfig = serde_json::from_str(&text).map_err(|e| err(e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut cfg.images_dir,
            &mut cfg.detections,
            &mut cfg.annotations,
            &mut cfg.rescored,
            &mut cfg.pairs,
            &mut cfg.patches,
            &mut cfg.model,
            &mut cfg.texture_maps_dir,
            &mut cfg.score_rasters_dir,
            &mut cfg.output,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if cfg.workers == 0 {
            return Err(err("workers must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&cfg.nms_iou) {
            return Err(err("nms_iou must lie in [0, 1]".into()));
        }
        Ok(cfg)
    }

    pub fn require<'a>(field: &'a Option<PathBuf>, name: &'static str) -> CliResult<&'a Path> {
        field.as_deref().ok_or(CliError::MissingSetting(name))
    }
}
