use std::collections::BTreeMap;

use crate::chanmap::ChannelMap;
use crate::error::{Error, Result};
use crate::geom::BBox;

/// Per-pixel base-scores for one category, stored as a summed-area table.
#[derive(Debug, Clone)]
pub struct ScoreRaster {
    width: usize,
    height: usize,
    table: Vec<f64>,
}

impl ScoreRaster {
    /// Uses the first channel of `map`.
    pub fn from_map(map: &ChannelMap) -> Self {
        let (w, h) = (map.width(), map.height());
        let plane = map.channel(0);
        let mut table = vec![0.0; (w + 1) * (h + 1)];
        for y in 0..h {
            let mut row = 0.0;
            for x in 0..w {
                row += plane[y * w + x] as f64;
                table[(y + 1) * (w + 1) + x + 1] = table[y * (w + 1) + x + 1] + row;
            }
        }
        ScoreRaster { width: w, height: h, table }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn mean(&self, b: &BBox) -> Result<f64> {
        if !b.fits_in(self.width, self.height) {
            return Err(Error::OutOfBounds {
                bbox: *b,
                width: self.width,
                height: self.height,
            });
        }
        let s = self.width + 1;
        let (x0, y0) = (b.x as usize, b.y as usize);
        let (x1, y1) = (x0 + b.w as usize, y0 + b.h as usize);
        let t = &self.table;
        let sum = t[y1 * s + x1] - t[y0 * s + x1] - t[y1 * s + x0] + t[y0 * s + x0];
        Ok(sum / b.area() as f64)
    }
}

pub const DEFAULT_LOOKUP_IOU: f64 = 0.3;

/// Where supporter base-scores come from.
#[derive(Debug, Clone)]
pub enum ScoreProvider {
    /// Mean of a dense per-category score raster over the box.
    DenseMap { rasters: BTreeMap<String, ScoreRaster> },
    /// Score of the best-overlapping same-category detection, 0 when none reaches `min_iou`.
    DetectionLookup {
        detections: Vec<(String, BBox, f64)>,
        min_iou: f64,
    },
}

impl ScoreProvider {
    pub fn dense(maps: &BTreeMap<String, ChannelMap>) -> Self {
        ScoreProvider::DenseMap {
            rasters: maps.iter().map(|(c, m)| (c.clone(), ScoreRaster::from_map(m))).collect(),
        }
    }

    pub fn lookup(detections: Vec<(String, BBox, f64)>, min_iou: f64) -> Result<Self> {
        if !(min_iou > 0.0 && min_iou <= 1.0) {
            return Err(Error::InvalidArgument("lookup IoU threshold must lie in (0, 1]".into()));
        }
        Ok(ScoreProvider::DetectionLookup { detections, min_iou })
    }

    /// Checks dense rasters against the image size.
    pub fn check_dims(&self, width: usize, height: usize) -> Result<()> {
        if let ScoreProvider::DenseMap { rasters } = self {
            for (c, r) in rasters {
                if r.dims() != (width, height) {
                    return Err(Error::ChannelMismatch(format!(
                        "score raster for {c:?} is {}x{}, image is {width}x{height}",
                        r.dims().0,
                        r.dims().1
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Base-score for `category` over `bbox`.
pub fn supporter_score_lookup(sp: &ScoreProvider, bbox: &BBox, category: &str) -> Result<f64> {
    match sp {
        ScoreProvider::DenseMap { rasters } => rasters
            .get(category)
            .ok_or_else(|| Error::MissingCategory(category.to_string()))?
            .mean(bbox),
        ScoreProvider::DetectionLookup { detections, min_iou } => {
            let mut best: Option<(f64, f64)> = None;
            for (c, b, s) in detections {
                if c != category {
                    continue;
                }
                let iou = b.iou(bbox);
                if iou >= *min_iou && best.is_none_or(|(bi, _)| iou > bi) {
                    best = Some((iou, *s));
                }
            }
            Ok(best.map_or(0.0, |(_, s)| s))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_constant_map() {
        let map = ChannelMap::new(10, 8, 1, vec![0.7; 80]).unwrap();
        let sp = ScoreProvider::dense(&[("dog".to_string(), map)].into());
        let s = supporter_score_lookup(&sp, &BBox::new(2, 1, 5, 6), "dog").unwrap();
        assert!((s - 0.7).abs() < 1e-6);
        assert!(matches!(
            supporter_score_lookup(&sp, &BBox::new(2, 1, 5, 6), "cat"),
            Err(Error::MissingCategory(_))
        ));
        assert!(sp.check_dims(10, 8).is_ok() && sp.check_dims(8, 10).is_err());
    }

    #[test]
    fn lookup_defaults_to_zero() {
        let sp = ScoreProvider::lookup(vec![("dog".into(), BBox::new(50, 50, 10, 10), 0.9)], 0.3).unwrap();
        assert_eq!(supporter_score_lookup(&sp, &BBox::new(0, 0, 10, 10), "dog").unwrap(), 0.0);
        assert!(ScoreProvider::lookup(vec![], 0.0).is_err());
    }

    #[test]
    fn lookup_takes_max_iou() {
        let q = BBox::new(0, 0, 10, 10);
        // IoUs against q: 0.2 (wrong category too), 0.6-ish, 0.9-ish
        let dets = vec![
            ("dog".to_string(), BBox::new(0, 0, 10, 2), 0.11),
            ("dog".to_string(), BBox::new(0, 0, 10, 6), 0.22),
            ("dog".to_string(), BBox::new(0, 0, 10, 9), 0.33),
            ("cat".to_string(), BBox::new(0, 0, 10, 10), 0.99),
        ];
        let ious: Vec<f64> = dets.iter().map(|d| d.1.iou(&q)).collect();
        assert_eq!(&ious[..3], &[0.2, 0.6, 0.9]);
        let sp = ScoreProvider::lookup(dets, 0.3).unwrap();
        assert_eq!(supporter_score_lookup(&sp, &q, "dog").unwrap(), 0.33);
    }
}
