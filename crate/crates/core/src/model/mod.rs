//! Dependency model: binned covariances, exponential fits, category priors and the
//! model file.

mod binning;
mod fit;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::DistanceParams;

pub use binning::{
    accumulate, bin_covariances, bin_index, default_edges, pair_distance_stats, BinSums, BinnedCov, CovBin,
    DistanceStats, PairSample, DEFAULT_MIN_COUNT,
};
pub use fit::{
    amplitude_for, curve_points, decay_grid, fit_curve, fit_exponential, weighted_residual, CurveFit, Exponential,
    GammaFit, GammaParams, WeightedPoint, DECAY_GRID_LEN,
};

pub const MODEL_VERSION: u32 = 1;
/// Diagonal loading of the covariance system, relative to `γ_ss(0)`.
pub const DEFAULT_RIDGE: f64 = 1e-6;

/// Probability that a random patch carries the category, and its expected base-score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prior {
    pub e_l: f64,
    pub e_s: f64,
}

/// One annotated patch used for prior estimation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchRecord {
    pub categories: Vec<String>,
    #[serde(default)]
    pub scores: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CategoryPriors {
    pub per_category: BTreeMap<String, Prior>,
    pub fallback: Prior,
}

impl CategoryPriors {
    pub fn get(&self, category: &str) -> Prior {
        self.per_category.get(category).copied().unwrap_or(self.fallback)
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Per category: fraction of patches labeled with it, and mean score for it over
/// all patches (a patch without a score for the category counts as 0).
pub fn estimate_priors(patches: &[PatchRecord]) -> Result<CategoryPriors> {
    if patches.is_empty() {
        return Err(Error::EmptyInput("prior patches"));
    }
    let categories: BTreeSet<&String> = patches
        .iter()
        .flat_map(|p| p.categories.iter().chain(p.scores.keys()))
        .collect();
    let n = patches.len() as f64;
    let per_category: BTreeMap<String, Prior> = categories
        .into_iter()
        .map(|c| {
            let labeled = patches.iter().filter(|p| p.categories.contains(c)).count();
            let score_sum: f64 = patches.iter().map(|p| p.scores.get(c).copied().unwrap_or(0.0)).sum();
            (
                c.clone(),
                Prior {
                    e_l: labeled as f64 / n,
                    e_s: score_sum / n,
                },
            )
        })
        .collect();
    let fallback = Prior {
        e_l: mean(per_category.values().map(|p| p.e_l)),
        e_s: mean(per_category.values().map(|p| p.e_s)),
    };
    Ok(CategoryPriors {
        per_category,
        fallback,
    })
}

/// Everything the rescoring stage needs.
#[derive(Debug, Clone, PartialEq)]
pub struct DependencyModel {
    pub gamma: GammaParams,
    pub priors: CategoryPriors,
    pub distance: DistanceParams,
    /// Relative diagonal loading; the absolute ridge is `ridge · γ_ss(0)`.
    pub ridge: f64,
}

impl DependencyModel {
    pub fn gamma_ss(&self, d: f64) -> f64 {
        self.gamma.ss.eval(d)
    }

    pub fn gamma_ls(&self, d: f64) -> f64 {
        self.gamma.ls.eval(d)
    }

    pub fn ridge_abs(&self) -> f64 {
        self.ridge * self.gamma_ss(0.0)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, e) in [("gamma_ss", self.gamma.ss), ("gamma_ls", self.gamma.ls)] {
            if !(e.a.is_finite() && e.a >= 0.0 && e.b.is_finite() && e.b >= 0.0) {
                return Err(Error::InvalidModel(format!("{name} needs finite a >= 0 and b >= 0")));
            }
        }
        if !(self.gamma_ss(0.0) > 0.0) {
            return Err(Error::InvalidModel("gamma_ss(0) must be positive".into()));
        }
        if !(self.ridge.is_finite() && self.ridge >= 0.0) {
            return Err(Error::InvalidModel("ridge must be non-negative".into()));
        }
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        for (c, p) in self.priors.per_category.iter().map(|(c, p)| (c.as_str(), p)).chain([("<fallback>", &self.priors.fallback)]) {
            if !unit(p.e_l) || !unit(p.e_s) {
                return Err(Error::InvalidModel(format!("prior for {c} outside [0, 1]")));
            }
        }
        self.distance
            .validate()
            .map_err(|e| Error::InvalidModel(e.to_string()))
    }
}

/// On-disk shape; optional fields get defaults on load.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    version: u32,
    gamma_ss: Exponential,
    gamma_ls: Exponential,
    #[serde(default)]
    priors: BTreeMap<String, Prior>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fallback: Option<Prior>,
    #[serde(default)]
    distance: DistanceParams,
    #[serde(default = "default_ridge")]
    ridge: f64,
}

fn default_ridge() -> f64 {
    DEFAULT_RIDGE
}

impl DependencyModel {
    pub fn to_json(&self) -> String {
        let file = ModelFile {
            version: MODEL_VERSION,
            gamma_ss: self.gamma.ss,
            gamma_ls: self.gamma.ls,
            priors: self.priors.per_category.clone(),
            fallback: Some(self.priors.fallback),
            distance: self.distance,
            ridge: self.ridge,
        };
        serde_json::to_string_pretty(&file).expect("model serializes") + "\n"
    }

    /// Parses a model file. A missing `fallback` is the mean of the per-category priors.
    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        let malformed = |msg: String| Error::Malformed {
            path: origin.to_path_buf(),
            msg,
        };
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| malformed(e.to_string()))?;
        match value.get("version").and_then(|v| v.as_u64()) {
            Some(v) if v == MODEL_VERSION as u64 => {}
            Some(v) => return Err(Error::VersionMismatch(v as u32)),
            None => return Err(malformed("missing integer `version`".into())),
        }
        let file: ModelFile = serde_json::from_value(value).map_err(|e| malformed(e.to_string()))?;
        let fallback = match file.fallback {
            Some(p) => p,
            None if !file.priors.is_empty() => Prior {
                e_l: mean(file.priors.values().map(|p| p.e_l)),
                e_s: mean(file.priors.values().map(|p| p.e_s)),
            },
            None => return Err(malformed("model needs `priors` or `fallback`".into())),
        };
        let model = DependencyModel {
            gamma: GammaParams {
                ss: file.gamma_ss,
                ls: file.gamma_ls,
            },
            priors: CategoryPriors {
                per_category: file.priors,
                fallback,
            },
            distance: file.distance,
            ridge: file.ridge,
        };
        model.validate()?;
        Ok(model)
    }
}

/// Bins, fitted curves and the resulting model.
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub bins: BinnedCov,
    pub fit: GammaFit,
    pub model: DependencyModel,
}

/// Full training: bin the pairs, fit both curves and estimate priors.
pub fn fit_model(
    pairs: &[PairSample],
    patches: &[PatchRecord],
    edges: &[f64],
    min_count: u64,
    distance: DistanceParams,
) -> Result<FitReport> {
    let bins = bin_covariances(pairs, edges, min_count)?;
    let fit = fit_exponential(&bins)?;
    let model = DependencyModel {
        gamma: fit.params(),
        priors: estimate_priors(patches)?,
        distance,
        ridge: DEFAULT_RIDGE,
    };
    model.validate()?;
    Ok(FitReport { bins, fit, model })
}

pub fn save_model(m: &DependencyModel, path: &Path) -> Result<()> {
    m.validate()?;
    fs::write(path, m.to_json()).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<DependencyModel> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    DependencyModel::from_json(&text, path)
}
