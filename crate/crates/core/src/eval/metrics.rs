use serde::{Deserialize, Serialize};

use super::DetLabel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ApMode {
    /// Area under the interpolated P-R curve.
    #[default]
    Area,
    /// VOC2007 11-point interpolated mean.
    Voc07,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrCurve {
    pub points: Vec<PrPoint>,
    pub n_gt: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrResult {
    pub curve: PrCurve,
    /// Absent when there is no ground truth.
    pub ap: Option<f64>,
    pub f_best: f64,
}

pub fn average_precision(points: &[PrPoint], mode: ApMode) -> f64 {
    match mode {
        ApMode::Area => {
            let mut rec = Vec::with_capacity(points.len() + 2);
            let mut prec = Vec::with_capacity(points.len() + 2);
            rec.push(0.0);
            prec.push(0.0);
            for p in points {
                rec.push(p.recall);
                prec.push(p.precision);
            }
            rec.push(1.0);
            prec.push(0.0);
            for i in (0..prec.len() - 1).rev() {
                prec[i] = prec[i].max(prec[i + 1]);
            }
            (1..rec.len())
                .filter(|&i| rec[i] != rec[i - 1])
                .map(|i| (rec[i] - rec[i - 1]) * prec[i])
                .sum()
        }
        ApMode::Voc07 => {
            (0..=10)
                .map(|k| {
                    let t = k as f64 / 10.0;
                    points
                        .iter()
                        .filter(|p| p.recall >= t)
                        .map(|p| p.precision)
                        .fold(0.0, f64::max)
                })
                .sum::<f64>()
                / 11.0
        }
    }
}

/// Cumulative precision/recall by descending score (ties by input order), AP and
/// the best F-score. IGNORED entries are skipped.
pub fn pr_ap_f(labels: &[DetLabel], scores: &[f64], n_gt: usize, mode: ApMode) -> PrResult {
    assert_eq!(labels.len(), scores.len(), "one score per label");
    let mut order: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] != DetLabel::Ignored).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let (mut tp, mut fp) = (0usize, 0usize);
    let points: Vec<PrPoint> = order
        .iter()
        .map(|&i| {
            if labels[i] == DetLabel::Tp {
                tp += 1;
            } else {
                fp += 1;
            }
            PrPoint {
                threshold: scores[i],
                precision: tp as f64 / (tp + fp) as f64,
                recall: if n_gt > 0 { tp as f64 / n_gt as f64 } else { 0.0 },
            }
        })
        .collect();
    let f_best = points
        .iter()
        .map(|p| {
            let s = p.precision + p.recall;
            if s > 0.0 {
                2.0 * p.precision * p.recall / s
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max);
    let ap = (n_gt > 0).then(|| average_precision(&points, mode));
    PrResult {
        curve: PrCurve { points, n_gt },
        ap,
        f_best,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use DetLabel::*;

    #[test]
    fn all_true_positives() {
        let r = pr_ap_f(&[Tp, Tp, Tp], &[0.9, 0.8, 0.7], 3, ApMode::Area);
        assert_eq!(r.ap, Some(1.0));
        assert_eq!(r.f_best, 1.0);
    }

    #[test]
    fn three_detection_trace() {
        let r = pr_ap_f(&[Tp, Fp, Tp], &[0.9, 0.8, 0.7], 2, ApMode::Area);
        let p: Vec<f64> = r.curve.points.iter().map(|p| p.precision).collect();
        let rc: Vec<f64> = r.curve.points.iter().map(|p| p.recall).collect();
        assert_eq!(p, vec![1.0, 0.5, 2.0 / 3.0]);
        assert_eq!(rc, vec![0.5, 0.5, 1.0]);
        assert!((r.ap.unwrap() - 5.0 / 6.0).abs() < 1e-15);
        assert!((r.f_best - 0.8).abs() < 1e-15);
        let v = pr_ap_f(&[Tp, Fp, Tp], &[0.9, 0.8, 0.7], 2, ApMode::Voc07);
        assert!((v.ap.unwrap() - 28.0 / 33.0).abs() < 1e-15);
    }

    #[test]
    fn no_true_positives() {
        let r = pr_ap_f(&[Fp, Fp], &[0.9, 0.1], 4, ApMode::Area);
        assert_eq!(r.ap, Some(0.0));
        assert_eq!(r.f_best, 0.0);
        let none = pr_ap_f(&[Fp], &[0.9], 0, ApMode::Area);
        assert_eq!(none.ap, None);
    }

    #[test]
    fn ignored_entries_are_skipped() {
        let r = pr_ap_f(&[Tp, Ignored, Tp], &[0.9, 0.95, 0.7], 2, ApMode::Area);
        assert_eq!(r.curve.points.len(), 2);
        assert_eq!(r.ap, Some(1.0));
    }
}
