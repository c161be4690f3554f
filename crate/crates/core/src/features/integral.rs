use crate::error::{Error, Result};
use crate::geom::BBox;

use super::channels::{ChannelLayout, ChannelStack};

/// Summed-area tables of size `(width+1) x (height+1)` for every channel, with a
/// zero first row and column.
#[derive(Debug, Clone)]
pub struct IntegralStack {
    width: usize,
    height: usize,
    layout: ChannelLayout,
    tables: Vec<Vec<f64>>,
}

impl IntegralStack {
    pub fn build(cs: &ChannelStack) -> Self {
        let (w, h) = (cs.width(), cs.height());
        let stride = w + 1;
        let tables = (0..cs.layout().total())
            .map(|c| {
                let plane = cs.plane(c);
                let mut t = vec![0.0; stride * (h + 1)];
                for y in 0..h {
                    let mut row = 0.0;
                    for x in 0..w {
                        row += plane[y * w + x];
                        t[(y + 1) * stride + x + 1] = t[y * stride + x + 1] + row;
                    }
                }
                t
            })
            .collect();
        IntegralStack {
            width: w,
            height: h,
            layout: cs.layout(),
            tables,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn layout(&self) -> ChannelLayout {
        self.layout
    }

    /// Table entry at `(x, y)`: the sum over columns `0..x` and rows `0..y`.
    pub fn at(&self, c: usize, x: usize, y: usize) -> f64 {
        self.tables[c][y * (self.width + 1) + x]
    }

    /// Sum of channel `c` over `b`; `b` must lie inside the image.
    #[inline]
    pub fn box_sum(&self, b: &BBox, c: usize) -> f64 {
        debug_assert!(b.fits_in(self.width, self.height));
        let t = &self.tables[c];
        let s = self.width + 1;
        let (x0, y0) = (b.x as usize, b.y as usize);
        let (x1, y1) = (x0 + b.w as usize, y0 + b.h as usize);
        t[y1 * s + x1] - t[y0 * s + x1] - t[y1 * s + x0] + t[y0 * s + x0]
    }

    pub fn try_box_sum(&self, b: &BBox, c: usize) -> Result<f64> {
        if !b.fits_in(self.width, self.height) {
            return Err(Error::OutOfBounds {
                bbox: *b,
                width: self.width,
                height: self.height,
            });
        }
        if c >= self.tables.len() {
            return Err(Error::InvalidArgument(format!("no channel {c}")));
        }
        Ok(self.box_sum(b, c))
    }
}
