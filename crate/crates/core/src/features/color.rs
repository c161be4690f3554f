/// Bins per HSV channel.
pub const COLOR_BINS: usize = 10;
/// Total color-indicator channels: one per (HSV channel, bin).
pub const COLOR_CHANNELS: usize = 3 * COLOR_BINS;

/// Standard RGB to HSV, every component in `[0, 1]` and hue in `[0, 1)`.
pub fn rgb_to_hsv(rgb: [u8; 3]) -> [f64; 3] {
    let [r, g, b] = rgb.map(|v| v as f64 / 255.0);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let s = if max > 0.0 { delta / max } else { 0.0 };
    let h = if delta == 0.0 {
        0.0
    } else {
        let sector = if max == r {
            ((g - b) / delta).rem_euclid(6.0)
        } else if max == g {
            (b - r) / delta + 2.0
        } else {
            (r - g) / delta + 4.0
        };
        let h = sector / 6.0;
        if h >= 1.0 {
            0.0
        } else {
            h
        }
    };
    [h, s, max]
}

/// `floor(value * 10)`, with 1.0 clamped into the last bin.
pub fn hsv_bin(value: f64) -> usize {
    ((value * COLOR_BINS as f64).floor() as usize).min(COLOR_BINS - 1)
}
