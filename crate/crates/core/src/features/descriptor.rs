use crate::error::{Error, Result};
use crate::geom::BBox;

use super::channels::{ChannelLayout, ChannelStack};
use super::integral::IntegralStack;

/// Anything that can sum a channel over a box. Implemented by the integral
/// stack (O(1) per query) and by the raw channel stack (direct summation).
pub trait BoxSums {
    fn width(&self) -> usize;
    fn height(&self) -> usize;
    fn layout(&self) -> ChannelLayout;
    fn box_sum(&self, b: &BBox, c: usize) -> f64;
}

impl BoxSums for IntegralStack {
    fn width(&self) -> usize {
        IntegralStack::width(self)
    }
    fn height(&self) -> usize {
        IntegralStack::height(self)
    }
    fn layout(&self) -> ChannelLayout {
        IntegralStack::layout(self)
    }
    #[inline]
    fn box_sum(&self, b: &BBox, c: usize) -> f64 {
        IntegralStack::box_sum(self, b, c)
    }
}

impl BoxSums for ChannelStack {
    fn width(&self) -> usize {
        ChannelStack::width(self)
    }
    fn height(&self) -> usize {
        ChannelStack::height(self)
    }
    fn layout(&self) -> ChannelLayout {
        ChannelStack::layout(self)
    }
    fn box_sum(&self, b: &BBox, c: usize) -> f64 {
        let plane = self.plane(c);
        let w = ChannelStack::width(self);
        let mut acc = 0.0;
        for y in b.y as usize..b.bottom() as usize {
            let row = &plane[y * w + b.x as usize..y * w + b.right() as usize];
            for v in row {
                acc += v;
            }
        }
        acc
    }
}

/// Color and texture histograms of one region, each L1-normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct HistPart {
    pub color: Vec<f64>,
    pub texture: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchDescriptor {
    pub whole: HistPart,
    /// Top-left, top-right, bottom-left, bottom-right quarters when the pyramid is on.
    pub cells: Option<[HistPart; 4]>,
}

impl PatchDescriptor {
    pub fn layout(&self) -> ChannelLayout {
        ChannelLayout {
            color: self.whole.color.len(),
            texture: self.whole.texture.len(),
        }
    }
}

fn normalize_or_uniform(mut v: Vec<f64>) -> Vec<f64> {
    let total: f64 = v.iter().sum();
    if total > 0.0 {
        v.iter_mut().for_each(|x| *x /= total);
    } else {
        let u = 1.0 / v.len() as f64;
        v.iter_mut().for_each(|x| *x = u);
    }
    v
}

fn describe_region<S: BoxSums + ?Sized>(src: &S, b: &BBox) -> HistPart {
    let layout = src.layout();
    if b.area() == 0 {
        return HistPart {
            color: normalize_or_uniform(vec![0.0; layout.color]),
            texture: normalize_or_uniform(vec![0.0; layout.texture]),
        };
    }
    let area = b.area() as f64;
    let color = (0..layout.color).map(|c| src.box_sum(b, c)).collect();
    let texture = (0..layout.texture)
        .map(|t| src.box_sum(b, layout.color + t) / area)
        .collect();
    HistPart {
        color: normalize_or_uniform(color),
        texture: normalize_or_uniform(texture),
    }
}

/// 2x2 split; the odd pixel of each axis goes to the second cell.
pub(crate) fn quarter(b: &BBox) -> [BBox; 4] {
    let (w0, h0) = (b.w / 2, b.h / 2);
    let (w1, h1) = (b.w - w0, b.h - h0);
    let (xm, ym) = (b.x + w0, b.y + h0);
    [
        BBox::new(b.x, b.y, w0, h0),
        BBox::new(xm, b.y, w1, h0),
        BBox::new(b.x, ym, w0, h1),
        BBox::new(xm, ym, w1, h1),
    ]
}

pub(crate) fn describe_unchecked<S: BoxSums + ?Sized>(src: &S, b: &BBox, pyramid: bool) -> PatchDescriptor {
    PatchDescriptor {
        whole: describe_region(src, b),
        cells: pyramid.then(|| quarter(b).map(|cell| describe_region(src, &cell))),
    }
}

/// Describes the patch `b`: normalized color-bin counts and normalized mean texture
/// responses, plus the same for each quarter when `pyramid` is set. A part whose
/// sums are all zero becomes the uniform histogram.
pub fn describe_patch<S: BoxSums + ?Sized>(src: &S, b: &BBox, pyramid: bool) -> Result<PatchDescriptor> {
    if !b.fits_in(src.width(), src.height()) {
        return Err(Error::OutOfBounds {
            bbox: *b,
            width: src.width(),
            height: src.height(),
        });
    }
    Ok(describe_unchecked(src, b, pyramid))
}
