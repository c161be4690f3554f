use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::binning::BinnedCov;

/// `a · exp(−b · d)` with `a, b ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Exponential {
    pub a: f64,
    pub b: f64,
}

impl Exponential {
    pub const ZERO: Exponential = Exponential { a: 0.0, b: 0.0 };

    pub fn eval(&self, d: f64) -> f64 {
        self.a * (-self.b * d).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaParams {
    pub ss: Exponential,
    pub ls: Exponential,
}

pub const DECAY_GRID_LEN: usize = 200;
pub const DECAY_MIN: f64 = 0.1;
pub const DECAY_MAX: f64 = 50.0;

/// 200 log-spaced decay rates spanning `[0.1, 50]`.
pub fn decay_grid() -> Vec<f64> {
    let (lo, hi) = (DECAY_MIN.ln(), DECAY_MAX.ln());
    (0..DECAY_GRID_LEN)
        .map(|k| {
            if k == DECAY_GRID_LEN - 1 {
                DECAY_MAX
            } else {
                (lo + (hi - lo) * k as f64 / (DECAY_GRID_LEN - 1) as f64).exp()
            }
        })
        .collect()
}

/// Fitted curve plus its count-weighted squared residual.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveFit {
    pub curve: Exponential,
    pub residual: f64,
    /// Set when no bin had a positive covariance; the curve is then identically zero.
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaFit {
    pub ss: CurveFit,
    pub ls: CurveFit,
}

impl GammaFit {
    pub fn params(&self) -> GammaParams {
        GammaParams {
            ss: self.ss.curve,
            ls: self.ls.curve,
        }
    }
}

/// `(midpoint, value, weight)` for each valid bin.
pub type WeightedPoint = (f64, f64, f64);

/// Count-weighted squared error of `curve` against `points`.
pub fn weighted_residual(points: &[WeightedPoint], curve: &Exponential) -> f64 {
    points
        .iter()
        .map(|&(d, v, n)| {
            let r = v - curve.eval(d);
            n * r * r
        })
        .sum()
}

/// Best amplitude for a fixed decay: closed-form weighted least squares, clamped at 0.
pub fn amplitude_for(points: &[WeightedPoint], b: f64) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for &(d, v, n) in points {
        let e = (-b * d).exp();
        num += n * e * v;
        den += n * e * e;
    }
    if den > 0.0 {
        (num / den).max(0.0)
    } else {
        0.0
    }
}

/// Grid search over the decay, closed form for the amplitude.
pub fn fit_curve(points: &[WeightedPoint]) -> Result<CurveFit> {
    if points.len() < 2 {
        return Err(Error::InsufficientBins(points.len()));
    }
    if points.iter().all(|&(_, v, _)| v <= 0.0) {
        let curve = Exponential { a: 0.0, b: DECAY_MIN };
        return Ok(CurveFit {
            curve,
            residual: weighted_residual(points, &curve),
            degenerate: true,
        });
    }
    let mut best: Option<CurveFit> = None;
    for b in decay_grid() {
        let curve = Exponential {
            a: amplitude_for(points, b),
            b,
        };
        let residual = weighted_residual(points, &curve);
        if best.is_none_or(|f| residual < f.residual) {
            best = Some(CurveFit {
                curve,
                residual,
                degenerate: false,
            });
        }
    }
    Ok(best.expect("grid is non-empty"))
}

pub fn curve_points(bc: &BinnedCov) -> (Vec<WeightedPoint>, Vec<WeightedPoint>) {
    bc.valid_bins()
        .map(|b| {
            let (d, n) = (b.midpoint(), b.count as f64);
            ((d, b.cov_ss, n), (d, b.cov_ls, n))
        })
        .unzip()
}

/// Fits decaying exponentials to the binned score/score and label/score covariances.
pub fn fit_exponential(bc: &BinnedCov) -> Result<GammaFit> {
    let (ss, ls) = curve_points(bc);
    let fit = GammaFit {
        ss: fit_curve(&ss)?,
        ls: fit_curve(&ls)?,
    };
    if fit.ss.degenerate {
        warn!("no positive score/score covariance; gamma_ss is identically zero");
    }
    if fit.ls.degenerate {
        warn!("no positive label/score covariance; gamma_ls is identically zero");
    }
    Ok(fit)
}
