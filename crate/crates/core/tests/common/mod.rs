#![allow(dead_code)]

use ciss::{BBox, Image};
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

pub type TestRng = Xoshiro256PlusPlus;

pub fn rng(seed: u64) -> TestRng {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

/// Pixel noise over a few flat blocks, so both ties and distinct distances occur.
pub fn blocky_image(rng: &mut TestRng, w: usize, h: usize) -> Image {
    let palette: Vec<[u8; 3]> = (0..4).map(|_| rng.random()).collect();
    let cell = rng.random_range(4..=16usize);
    let noise = rng.random_range(0..=40u8);
    let mut px = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        for x in 0..w {
            let base = palette[((x / cell) * 7 + (y / cell) * 3) % palette.len()];
            for c in base {
                let n = if noise > 0 { rng.random_range(0..=noise) } else { 0 };
                px.push(c.saturating_add(n));
            }
        }
    }
    Image::new(w, h, px).unwrap()
}

pub fn noise_image(rng: &mut TestRng, w: usize, h: usize) -> Image {
    let px = (0..w * h * 3).map(|_| rng.random()).collect();
    Image::new(w, h, px).unwrap()
}

pub fn random_box(rng: &mut TestRng, w: usize, h: usize, min_side: u32) -> BBox {
    let bw = rng.random_range(min_side..=w as u32);
    let bh = rng.random_range(min_side..=h as u32);
    let x = rng.random_range(0..=w as u32 - bw);
    let y = rng.random_range(0..=h as u32 - bh);
    BBox::new(x, y, bw, bh)
}
