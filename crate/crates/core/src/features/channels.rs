use std::path::PathBuf;

use crate::chanmap::ChannelMap;
use crate::error::{Error, Result};
use crate::image::Image;

use super::color::{hsv_bin, rgb_to_hsv, COLOR_BINS, COLOR_CHANNELS};
use super::filters::FilterBank;

/// Texture responses are snapped to multiples of this step so that box sums over
/// a channel are exact in `f64` (for channel totals below 2^29), which makes
/// integral-image sums and direct sums agree bit for bit.
pub(crate) const TEXTURE_QUANTUM: f64 = 1.0 / (1u64 << 24) as f64;

fn quantize(v: f64) -> f64 {
    (v / TEXTURE_QUANTUM).round() * TEXTURE_QUANTUM
}

/// Which channels are color indicators and which are texture responses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChannelLayout {
    pub color: usize,
    pub texture: usize,
}

impl ChannelLayout {
    pub fn total(&self) -> usize {
        self.color + self.texture
    }
}

#[derive(Debug, Clone)]
pub enum TextureSource {
    FilterBank(FilterBank),
    /// Precomputed per-pixel maps on disk, expected to carry `channels` planes.
    External { path: PathBuf, channels: usize },
    /// Precomputed maps already in memory.
    Maps(ChannelMap),
}

impl Default for TextureSource {
    fn default() -> Self {
        TextureSource::FilterBank(FilterBank::default())
    }
}

/// Per-pixel non-negative channel planes: 30 HSV bin indicators then `T` texture maps.
#[derive(Debug, Clone)]
pub struct ChannelStack {
    width: usize,
    height: usize,
    layout: ChannelLayout,
    planes: Vec<Vec<f64>>,
}

impl ChannelStack {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn layout(&self) -> ChannelLayout {
        self.layout
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        &self.planes[c]
    }

    pub fn value(&self, c: usize, x: usize, y: usize) -> f64 {
        self.planes[c][y * self.width + x]
    }
}

fn color_planes(img: &Image) -> Vec<Vec<f64>> {
    let n = img.width() * img.height();
    let mut planes = vec![vec![0.0; n]; COLOR_CHANNELS];
    for (i, px) in img.pixels().chunks_exact(3).enumerate() {
        let hsv = rgb_to_hsv([px[0], px[1], px[2]]);
        for (c, v) in hsv.into_iter().enumerate() {
            planes[c * COLOR_BINS + hsv_bin(v)][i] = 1.0;
        }
    }
    planes
}

fn external_planes(img: &Image, map: &ChannelMap, expected: Option<usize>) -> Result<Vec<Vec<f64>>> {
    if map.width() != img.width() || map.height() != img.height() {
        return Err(Error::ChannelMismatch(format!(
            "map is {}x{}, image is {}x{}",
            map.width(),
            map.height(),
            img.width(),
            img.height()
        )));
    }
    if let Some(t) = expected {
        if map.channels() != t {
            return Err(Error::ChannelMismatch(format!(
                "map has {} channels, expected {t}",
                map.channels()
            )));
        }
    }
    (0..map.channels())
        .map(|c| {
            map.channel(c)
                .iter()
                .map(|&v| {
                    if v.is_finite() && v >= 0.0 {
                        Ok(quantize(v as f64))
                    } else {
                        Err(Error::ChannelMismatch(format!(
                            "channel {c} holds a negative or non-finite value"
                        )))
                    }
                })
                .collect()
        })
        .collect()
}

/// Builds the color-indicator and texture channels for `img`.
pub fn compute_channel_stack(img: &Image, texture: &TextureSource) -> Result<ChannelStack> {
    let mut planes = color_planes(img);
    let texture_planes = match texture {
        TextureSource::FilterBank(bank) => bank
            .responses(img)
            .into_iter()
            .map(|p| p.into_iter().map(|v| quantize(v.max(0.0))).collect())
            .collect(),
        TextureSource::External { path, channels } => {
            let map = ChannelMap::load(path)?;
            external_planes(img, &map, Some(*channels))?
        }
        TextureSource::Maps(map) => external_planes(img, map, None)?,
    };
    let layout = ChannelLayout {
        color: COLOR_CHANNELS,
        texture: texture_planes.len(),
    };
    if layout.texture == 0 {
        return Err(Error::InvalidArgument("texture source has no channels".into()));
    }
    planes.extend(texture_planes);
    Ok(ChannelStack {
        width: img.width(),
        height: img.height(),
        layout,
        planes,
    })
}
