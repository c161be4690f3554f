//! The linear MMSE estimate: covariance system assembly, coefficient solve and
//! the centered linear score.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::DependencyModel;
use crate::search::Supporter;

/// `C · m = R` for one anchor; index 0 is the anchor, `1..=n` its supporters.
#[derive(Debug, Clone, PartialEq)]
pub struct MmseSystem {
    pub c: DMatrix<f64>,
    pub r: DVector<f64>,
    pub scores: DVector<f64>,
    pub expected_scores: DVector<f64>,
    pub expected_label: f64,
}

impl MmseSystem {
    pub fn dim(&self) -> usize {
        self.r.len()
    }
}

/// Assembles the covariance system from the fitted curves: `C[0][j] = γ_ss(d_j)`,
/// `C[j1][j2] = γ_ss(d_{j1,j2})`, diagonal `γ_ss(0) + ridge`, `R[j] = γ_ls(d_j)`.
///
/// `pairwise` holds the patch distance between every pair of supporters.
pub fn build_covariance_system(
    anchor_score: f64,
    category: &str,
    supporters: &[Supporter],
    pairwise: &[Vec<f64>],
    model: &DependencyModel,
) -> Result<MmseSystem> {
    let g0 = model.gamma_ss(0.0);
    if !(g0 > 0.0) {
        return Err(Error::InvalidModel("gamma_ss(0) must be positive".into()));
    }
    let n = supporters.len();
    if pairwise.len() != n || pairwise.iter().any(|row| row.len() != n) {
        return Err(Error::LengthMismatch(pairwise.len(), n));
    }
    let diag = g0 + model.ridge_abs();
    let dist_to_anchor: Vec<f64> = supporters.iter().map(|s| s.distance).collect();
    let dist = |i: usize, j: usize| -> f64 {
        match (i, j) {
            (0, 0) => 0.0,
            (0, j) => dist_to_anchor[j - 1],
            (i, 0) => dist_to_anchor[i - 1],
            (i, j) => pairwise[i - 1][j - 1],
        }
    };
    let c = DMatrix::from_fn(n + 1, n + 1, |i, j| {
        if i == j {
            diag
        } else {
            // read the upper triangle only, so C is symmetric even if `pairwise` is not
            let (a, b) = if i < j { (i, j) } else { (j, i) };
            model.gamma_ss(dist(a, b))
        }
    });
    let r = DVector::from_fn(n + 1, |i, _| model.gamma_ls(dist(0, i)));
    let mut scores = Vec::with_capacity(n + 1);
    scores.push(anchor_score);
    for s in supporters {
        scores.push(s.score.ok_or(Error::MissingSupporterScore)?);
    }
    let prior = model.priors.get(category);
    Ok(MmseSystem {
        c,
        r,
        scores: DVector::from_vec(scores),
        expected_scores: DVector::from_element(n + 1, prior.e_s),
        expected_label: prior.e_l,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MmseSolution {
    pub coefficients: DVector<f64>,
    /// The full solve failed and only the anchor's own coefficient is non-zero.
    pub fallback: bool,
}

/// Tolerance on `‖C·m − R‖∞` relative to `1 + ‖R‖∞`.
pub const RESIDUAL_TOL: f64 = 1e-9;

pub fn residual_inf(sys: &MmseSystem, m: &DVector<f64>) -> f64 {
    (&sys.c * m - &sys.r).amax()
}

fn residual_ok(sys: &MmseSystem, m: &DVector<f64>) -> bool {
    m.iter().all(|v| v.is_finite()) && residual_inf(sys, m) <= RESIDUAL_TOL * (1.0 + sys.r.amax())
}

/// Solves `C · m = R` by Cholesky, then LU if `C` is not numerically positive
/// definite. If neither meets the residual bound, the supporter-free solution is
/// returned with `fallback` set.
pub fn solve_mmse(sys: &MmseSystem) -> MmseSolution {
    let n = sys.dim();
    let scalar = sys.r[0] / sys.c[(0, 0)];
    if n == 1 {
        return MmseSolution {
            coefficients: DVector::from_element(1, scalar),
            fallback: false,
        };
    }
    let attempt = sys
        .c
        .clone()
        .cholesky()
        .map(|ch| ch.solve(&sys.r))
        .filter(|m| residual_ok(sys, m))
        .or_else(|| sys.c.clone().lu().solve(&sys.r).filter(|m| residual_ok(sys, m)));
    match attempt {
        Some(coefficients) => MmseSolution {
            coefficients,
            fallback: false,
        },
        None => {
            let mut coefficients = DVector::zeros(n);
            coefficients[0] = scalar;
            MmseSolution {
                coefficients,
                fallback: true,
            }
        }
    }
}

/// Raw estimate and its value clamped to `[0, 1]` for reporting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub raw: f64,
    pub value: f64,
}

impl Estimate {
    pub fn new(raw: f64) -> Self {
        Estimate {
            raw,
            value: raw.clamp(0.0, 1.0),
        }
    }
}

/// `E[l] + m · (s − E[s])`.
pub fn rescore_anchor(sys: &MmseSystem, m: &DVector<f64>) -> Estimate {
    let centered = &sys.scores - &sys.expected_scores;
    Estimate::new(sys.expected_label + m.dot(&centered))
}

/// Supporter-free estimate for a base-score: the revised base-score.
pub fn revised_base(model: &DependencyModel, category: &str, score: f64) -> Estimate {
    let prior = model.priors.get(category);
    let gain = model.gamma_ls(0.0) / (model.gamma_ss(0.0) + model.ridge_abs());
    Estimate::new(prior.e_l + gain * (score - prior.e_s))
}
