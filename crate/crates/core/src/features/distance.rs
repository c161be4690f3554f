use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::descriptor::{HistPart, PatchDescriptor};

/// Denominator guard in the chi-square distance.
pub const CHI_SQUARE_EPS: f64 = 1e-10;

/// Weights of the one-level 2x2 pyramid comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PyramidParams {
    pub enabled: bool,
    pub whole: f64,
    pub cells: f64,
}

impl Default for PyramidParams {
    fn default() -> Self {
        PyramidParams {
            enabled: true,
            whole: 0.5,
            cells: 0.5,
        }
    }
}

/// Color/texture weighting of the patch distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceParams {
    pub alpha: f64,
    pub beta: f64,
    #[serde(default)]
    pub pyramid: PyramidParams,
}

impl Default for DistanceParams {
    fn default() -> Self {
        DistanceParams {
            alpha: 0.5,
            beta: 0.5,
            pyramid: PyramidParams::default(),
        }
    }
}

impl DistanceParams {
    pub fn validate(&self) -> Result<()> {
        let nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !nonneg(self.alpha) || !nonneg(self.beta) || self.alpha + self.beta <= 0.0 {
            return Err(Error::InvalidArgument(
                "alpha and beta must be non-negative with a positive sum".into(),
            ));
        }
        let p = &self.pyramid;
        if !nonneg(p.whole) || !nonneg(p.cells) || (p.whole + p.cells - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(
                "pyramid weights must be non-negative and sum to 1".into(),
            ));
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn chi_square_unchecked(p: &[f64], q: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (a, b) in p.iter().zip(q) {
        let d = a - b;
        acc += d * d / (a + b + CHI_SQUARE_EPS);
    }
    0.5 * acc
}

/// `½ Σ (p−q)² / (p+q+ε)`; lies in `[0, 1]` for L1-normalized inputs.
pub fn chi_square(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch(p.len(), q.len()));
    }
    Ok(chi_square_unchecked(p, q))
}

#[inline]
fn part_term(a: &HistPart, b: &HistPart, params: &DistanceParams) -> f64 {
    params.alpha * chi_square_unchecked(&a.color, &b.color)
        + params.beta * chi_square_unchecked(&a.texture, &b.texture)
}

pub(crate) fn patch_distance_unchecked(a: &PatchDescriptor, b: &PatchDescriptor, params: &DistanceParams) -> f64 {
    let whole = part_term(&a.whole, &b.whole, params);
    match (&a.cells, &b.cells) {
        (Some(ca), Some(cb)) if params.pyramid.enabled => {
            let cells: f64 = ca.iter().zip(cb).map(|(x, y)| part_term(x, y, params)).sum::<f64>() / 4.0;
            params.pyramid.whole * whole + params.pyramid.cells * cells
        }
        _ => whole,
    }
}

/// Weighted color/texture chi-square distance, optionally blended with the mean
/// distance over the four pyramid cells.
pub fn patch_distance(a: &PatchDescriptor, b: &PatchDescriptor, params: &DistanceParams) -> Result<f64> {
    if a.layout() != b.layout() || a.cells.is_some() != b.cells.is_some() {
        return Err(Error::LayoutMismatch);
    }
    Ok(patch_distance_unchecked(a, b, params))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn part(color: &[f64], texture: &[f64]) -> HistPart {
        HistPart {
            color: color.to_vec(),
            texture: texture.to_vec(),
        }
    }

    #[test]
    fn chi_square_basics() {
        let h = [0.2, 0.3, 0.5];
        assert_eq!(chi_square(&h, &h).unwrap(), 0.0);
        let d = chi_square(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert!((d - 1.0).abs() < 1e-9);
        assert!(matches!(chi_square(&h, &[1.0]), Err(Error::LengthMismatch(3, 1))));
    }

    #[test]
    fn alpha_only_is_color_chi_square() {
        let a = PatchDescriptor {
            whole: part(&[0.5, 0.5, 0.0], &[1.0, 0.0]),
            cells: None,
        };
        let b = PatchDescriptor {
            whole: part(&[0.1, 0.6, 0.3], &[0.0, 1.0]),
            cells: None,
        };
        let params = DistanceParams {
            alpha: 1.0,
            beta: 0.0,
            ..Default::default()
        };
        let d = patch_distance(&a, &b, &params).unwrap();
        assert_eq!(d, chi_square(&a.whole.color, &b.whole.color).unwrap());
        assert_eq!(patch_distance(&a, &a, &DistanceParams::default()).unwrap(), 0.0);
    }

    #[test]
    fn mismatched_layouts_are_rejected() {
        let a = PatchDescriptor {
            whole: part(&[1.0, 0.0], &[1.0]),
            cells: None,
        };
        let b = PatchDescriptor {
            whole: part(&[1.0, 0.0], &[0.5, 0.5]),
            cells: None,
        };
        assert!(matches!(
            patch_distance(&a, &b, &DistanceParams::default()),
            Err(Error::LayoutMismatch)
        ));
    }

    #[test]
    fn params_validation() {
        assert!(DistanceParams::default().validate().is_ok());
        let bad = DistanceParams {
            alpha: 0.0,
            beta: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
