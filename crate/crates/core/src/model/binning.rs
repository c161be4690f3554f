use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One annotated training pair of patches from the same image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairSample {
    pub distance: f64,
    pub s1: f64,
    pub s2: f64,
    pub l1: u8,
    pub l2: u8,
    pub same_label: bool,
}

impl PairSample {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !(self.distance >= 0.0) || !self.distance.is_finite() {
            return Err(Error::InvalidArgument(format!("pair distance {} is not >= 0", self.distance)));
        }
        if !unit(self.s1) || !unit(self.s2) {
            return Err(Error::InvalidArgument("pair scores must lie in [0, 1]".into()));
        }
        if self.l1 > 1 || self.l2 > 1 {
            return Err(Error::InvalidArgument("pair labels must be 0 or 1".into()));
        }
        Ok(())
    }
}

pub const DEFAULT_MIN_COUNT: u64 = 50;

/// `0.0, 0.05, ..., 1.0`.
pub fn default_edges() -> Vec<f64> {
    (0..=20).map(|i| i as f64 * 0.05).collect()
}

/// Raw moment sums for one distance bin; merging shards is plain addition.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BinSums {
    pub count: u64,
    s1: f64,
    s2: f64,
    s1s2: f64,
    l: f64,
    s: f64,
    ls: f64,
}

impl BinSums {
    pub fn push(&mut self, p: &PairSample) {
        let (l1, l2) = (p.l1 as f64, p.l2 as f64);
        self.count += 1;
        self.s1 += p.s1;
        self.s2 += p.s2;
        self.s1s2 += p.s1 * p.s2;
        // (l1, s2) and (l2, s1)
        self.l += l1 + l2;
        self.s += p.s2 + p.s1;
        self.ls += l1 * p.s2 + l2 * p.s1;
    }

    pub fn merge(&mut self, o: &BinSums) {
        self.count += o.count;
        self.s1 += o.s1;
        self.s2 += o.s2;
        self.s1s2 += o.s1s2;
        self.l += o.l;
        self.s += o.s;
        self.ls += o.ls;
    }

    pub fn cov_ss(&self) -> f64 {
        let n = self.count as f64;
        self.s1s2 / n - (self.s1 / n) * (self.s2 / n)
    }

    pub fn cov_ls(&self) -> f64 {
        let n = 2.0 * self.count as f64;
        self.ls / n - (self.l / n) * (self.s / n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovBin {
    pub lo: f64,
    pub hi: f64,
    pub count: u64,
    pub cov_ss: f64,
    pub cov_ls: f64,
    pub valid: bool,
}

impl CovBin {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedCov {
    pub bins: Vec<CovBin>,
}

impl BinnedCov {
    pub fn valid_bins(&self) -> impl Iterator<Item = &CovBin> {
        self.bins.iter().filter(|b| b.valid)
    }
}

fn check_edges(edges: &[f64]) -> Result<()> {
    if edges.len() < 2 || edges.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidArgument("bin edges must be strictly increasing, at least two".into()));
    }
    Ok(())
}

/// Bin index for `d`: bins are `[lo, hi)` except the last, which includes its upper edge.
pub fn bin_index(edges: &[f64], d: f64) -> Option<usize> {
    let last = edges.len() - 1;
    if d < edges[0] || d > edges[last] {
        return None;
    }
    if d == edges[last] {
        return Some(last - 1);
    }
    Some(edges.partition_point(|&e| e <= d) - 1)
}

/// Accumulates raw sums per bin; pairs outside the edges are dropped.
pub fn accumulate(pairs: &[PairSample], edges: &[f64]) -> Result<Vec<BinSums>> {
    check_edges(edges)?;
    let mut sums = vec![BinSums::default(); edges.len() - 1];
    for p in pairs {
        p.validate()?;
        if let Some(i) = bin_index(edges, p.distance) {
            sums[i].push(p);
        }
    }
    Ok(sums)
}

/// Per-bin score/score and label/score covariances. Bins holding fewer than
/// `min_count` pairs are kept but marked invalid.
pub fn bin_covariances(pairs: &[PairSample], edges: &[f64], min_count: u64) -> Result<BinnedCov> {
    if pairs.is_empty() {
        return Err(Error::NoValidBins);
    }
    let sums = accumulate(pairs, edges)?;
    let bins: Vec<CovBin> = sums
        .iter()
        .zip(edges.windows(2))
        .map(|(s, e)| {
            let valid = s.count >= min_count.max(1);
            CovBin {
                lo: e[0],
                hi: e[1],
                count: s.count,
                cov_ss: if s.count > 0 { s.cov_ss() } else { 0.0 },
                cov_ls: if s.count > 0 { s.cov_ls() } else { 0.0 },
                valid,
            }
        })
        .collect();
    if !bins.iter().any(|b| b.valid) {
        return Err(Error::NoValidBins);
    }
    Ok(BinnedCov { bins })
}

/// Normalized distance histograms of same-label and not-same pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceStats {
    pub edges: Vec<f64>,
    pub same: Vec<f64>,
    pub not_same: Vec<f64>,
    pub n_same: u64,
    pub n_not_same: u64,
}

impl DistanceStats {
    /// Mass of bins whose upper edge is at most `d`.
    pub fn mass_below(hist: &[f64], edges: &[f64], d: f64) -> f64 {
        hist.iter()
            .zip(edges.windows(2))
            .filter(|(_, e)| e[1] <= d + 1e-12)
            .map(|(m, _)| m)
            .sum()
    }
}

fn normalize_counts(counts: &[u64]) -> Vec<f64> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        vec![1.0 / counts.len() as f64; counts.len()]
    } else {
        counts.iter().map(|&c| c as f64 / total as f64).collect()
    }
}

pub fn pair_distance_stats(pairs: &[PairSample], edges: &[f64]) -> Result<DistanceStats> {
    check_edges(edges)?;
    let nb = edges.len() - 1;
    let (mut same, mut not_same) = (vec![0u64; nb], vec![0u64; nb]);
    for p in pairs {
        if let Some(i) = bin_index(edges, p.distance) {
            if p.same_label {
                same[i] += 1;
            } else {
                not_same[i] += 1;
            }
        }
    }
    Ok(DistanceStats {
        edges: edges.to_vec(),
        n_same: same.iter().sum(),
        n_not_same: not_same.iter().sum(),
        same: normalize_counts(&same),
        not_same: normalize_counts(&not_same),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(distance: f64, s1: f64, s2: f64, l1: u8, l2: u8) -> PairSample {
        PairSample {
            distance,
            s1,
            s2,
            l1,
            l2,
            same_label: l1 == l2,
        }
    }

    #[test]
    fn bin_index_edges() {
        let e = default_edges();
        assert_eq!(bin_index(&e, 0.0), Some(0));
        assert_eq!(bin_index(&e, 0.05), Some(1));
        assert_eq!(bin_index(&e, 1.0), Some(19));
        assert_eq!(bin_index(&e, 1.01), None);
    }

    #[test]
    fn constant_scores_have_zero_covariance() {
        let pairs: Vec<_> = (0..200).map(|i| pair((i % 20) as f64 * 0.05, 0.3, 0.3, (i % 2) as u8, 1)).collect();
        let bc = bin_covariances(&pairs, &default_edges(), 5).unwrap();
        assert!(bc.bins.iter().all(|b| b.cov_ss.abs() < 1e-15));
    }

    #[test]
    fn scores_equal_to_labels_give_label_variance() {
        // bin 0: l1 = l2 = s1 = s2, half ones
        let pairs: Vec<_> = (0..100)
            .map(|i| {
                let l = (i % 2) as u8;
                pair(0.01, l as f64, l as f64, l, l)
            })
            .collect();
        let bc = bin_covariances(&pairs, &default_edges(), 50).unwrap();
        assert!((bc.bins[0].cov_ss - 0.25).abs() < 1e-15);
        assert!((bc.bins[0].cov_ls - 0.25).abs() < 1e-15);
        assert!(bc.bins[0].valid && !bc.bins[1].valid);
    }

    #[test]
    fn errors() {
        assert!(matches!(bin_covariances(&[], &default_edges(), 50), Err(Error::NoValidBins)));
        let few = vec![pair(0.1, 0.2, 0.3, 0, 0); 10];
        assert!(matches!(bin_covariances(&few, &default_edges(), 50), Err(Error::NoValidBins)));
        assert!(bin_covariances(&few, &[0.0, 0.0], 1).is_err());
    }

    #[test]
    fn same_pairs_at_zero() {
        let pairs = vec![pair(0.0, 0.5, 0.5, 1, 1); 7];
        let st = pair_distance_stats(&pairs, &default_edges()).unwrap();
        assert_eq!(st.same[0], 1.0);
        assert!(st.not_same.iter().all(|&v| (v - 0.05).abs() < 1e-15));
        assert_eq!((st.n_same, st.n_not_same), (7, 0));
    }

    #[test]
    fn sharded_sums_merge() {
        let pairs: Vec<_> = (0..300)
            .map(|i| pair(0.02, (i % 7) as f64 / 7.0, (i % 5) as f64 / 5.0, (i % 3 == 0) as u8, (i % 2) as u8))
            .collect();
        let whole = accumulate(&pairs, &default_edges()).unwrap();
        let mut a = accumulate(&pairs[..120], &default_edges()).unwrap();
        let b = accumulate(&pairs[120..], &default_edges()).unwrap();
        a.iter_mut().zip(&b).for_each(|(x, y)| x.merge(y));
        assert_eq!(a[0].count, whole[0].count);
        assert!((a[0].cov_ss() - whole[0].cov_ss()).abs() < 1e-12);
        assert!((a[0].cov_ls() - whole[0].cov_ls()).abs() < 1e-12);
    }
}
