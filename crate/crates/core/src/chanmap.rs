//! The `CISSCHAN` raster format used for external texture maps and dense score maps.
//!
//! Layout: the 8-byte magic `CISSCHAN`, then little-endian `u32` width, height and
//! channel count, then `channels * height * width` little-endian `f32` values,
//! channel-major and row-major within a channel.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"CISSCHAN";
const HEADER_LEN: usize = 8 + 12;

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMap {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

impl ChannelMap {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 || channels == 0 {
            return Err(Error::InvalidArgument(
                "channel map dimensions must be positive".into(),
            ));
        }
        let n = width * height * channels;
        if data.len() != n {
            return Err(Error::LengthMismatch(data.len(), n));
        }
        Ok(ChannelMap {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Row-major plane of one channel.
    pub fn channel(&self, c: usize) -> &[f32] {
        let n = self.width * self.height;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.data.len());
        out.extend_from_slice(MAGIC);
        for v in [self.width, self.height, self.channels] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN || &bytes[..8] != MAGIC {
            return Err(Error::CorruptData("missing CISSCHAN header".into()));
        }
        let word = |i: usize| {
            let off = 8 + 4 * i;
            u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()) as usize
        };
        let (width, height, channels) = (word(0), word(1), word(2));
        let n = width
            .checked_mul(height)
            .and_then(|v| v.checked_mul(channels))
            .ok_or_else(|| Error::CorruptData("CISSCHAN dimensions overflow".into()))?;
        let body = &bytes[HEADER_LEN..];
        if body.len() != 4 * n {
            return Err(Error::CorruptData(format!(
                "CISSCHAN body has {} bytes, expected {}",
                body.len(),
                4 * n
            )));
        }
        let data = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        ChannelMap::new(width, height, channels, data)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        ChannelMap::from_bytes(&bytes)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }
}
