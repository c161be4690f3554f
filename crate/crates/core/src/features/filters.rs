//! Built-in texture filter bank applied to the grayscale image.
//!
//! All filters are separable Gaussian-family kernels with radius `ceil(3σ)` and
//! replicated borders. Odd kernels are evaluated as `Σ k_i (x[p+i] - x[p-i])` so a
//! constant image yields exactly zero derivative response.

use crate::image::Image;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Filter {
    /// First derivative of a Gaussian along `angle_deg` (0° = +x, 90° = +y).
    OrientedDerivative { sigma: f64, angle_deg: f64 },
    LaplacianOfGaussian { sigma: f64 },
    Gaussian { sigma: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    pub filters: Vec<Filter>,
}

impl Default for FilterBank {
    fn default() -> Self {
        let mut filters: Vec<Filter> = [0.0, 45.0, 90.0, 135.0]
            .into_iter()
            .map(|angle_deg| Filter::OrientedDerivative {
                sigma: 2.0,
                angle_deg,
            })
            .collect();
        filters.push(Filter::LaplacianOfGaussian { sigma: 1.0 });
        filters.push(Filter::LaplacianOfGaussian { sigma: 2.0 });
        filters.push(Filter::Gaussian { sigma: 1.0 });
        filters.push(Filter::Gaussian { sigma: 2.0 });
        FilterBank { filters }
    }
}

/// Rec. 601 luma scaled to `[0, 1]`.
pub fn luma(rgb: [u8; 3]) -> f64 {
    (0.299 * rgb[0] as f64 + 0.587 * rgb[1] as f64 + 0.114 * rgb[2] as f64) / 255.0
}

/// Half of a symmetric (`odd == false`) or antisymmetric kernel; `taps[i]` weighs offset `+i`.
struct Kernel {
    taps: Vec<f64>,
    odd: bool,
}

fn gaussian_taps(sigma: f64) -> Vec<f64> {
    let r = (3.0 * sigma).ceil() as usize;
    let raw: Vec<f64> = (0..=r)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total = raw[0] + 2.0 * raw[1..].iter().sum::<f64>();
    raw.into_iter().map(|v| v / total).collect()
}

fn gaussian(sigma: f64) -> Kernel {
    Kernel {
        taps: gaussian_taps(sigma),
        odd: false,
    }
}

/// Normalized so a unit-slope ramp responds with 1.
fn gaussian_derivative(sigma: f64) -> Kernel {
    let g = gaussian_taps(sigma);
    let mut taps: Vec<f64> = g
        .iter()
        .enumerate()
        .map(|(i, v)| i as f64 * v / (sigma * sigma))
        .collect();
    taps[0] = 0.0;
    let moment: f64 = 2.0 * taps.iter().enumerate().map(|(i, v)| i as f64 * v).sum::<f64>();
    taps.iter_mut().for_each(|v| *v /= moment);
    Kernel { taps, odd: true }
}

/// Zero-sum second derivative of a Gaussian.
fn gaussian_second_derivative(sigma: f64) -> Kernel {
    let g = gaussian_taps(sigma);
    let s2 = sigma * sigma;
    let mut taps: Vec<f64> = g
        .iter()
        .enumerate()
        .map(|(i, v)| ((i * i) as f64 / s2 - 1.0) / s2 * v)
        .collect();
    let total = taps[0] + 2.0 * taps[1..].iter().sum::<f64>();
    let n = (2 * taps.len() - 1) as f64;
    taps.iter_mut().for_each(|v| *v -= total / n);
    Kernel { taps, odd: false }
}

fn convolve(src: &[f64], width: usize, height: usize, kernel: &Kernel, along_x: bool) -> Vec<f64> {
    let (len, lines) = if along_x { (width, height) } else { (height, width) };
    let idx = |line: usize, p: usize| {
        if along_x {
            line * width + p
        } else {
            p * width + line
        }
    };
    let mut out = vec![0.0; src.len()];
    let last = len as isize - 1;
    let clamp = |p: isize| p.clamp(0, last) as usize;
    for line in 0..lines {
        for p in 0..len {
            let mut acc = if kernel.odd {
                0.0
            } else {
                kernel.taps[0] * src[idx(line, p)]
            };
            for (i, k) in kernel.taps.iter().enumerate().skip(1) {
                let fwd = src[idx(line, clamp(p as isize + i as isize))];
                let back = src[idx(line, clamp(p as isize - i as isize))];
                acc += if kernel.odd {
                    k * (fwd - back)
                } else {
                    k * (fwd + back)
                };
            }
            out[idx(line, p)] = acc;
        }
    }
    out
}

fn separable(gray: &[f64], w: usize, h: usize, kx: &Kernel, ky: &Kernel) -> Vec<f64> {
    let tmp = convolve(gray, w, h, kx, true);
    convolve(&tmp, w, h, ky, false)
}

fn snap(v: f64) -> f64 {
    if v.abs() < 1e-12 {
        0.0
    } else {
        v
    }
}

impl FilterBank {
    pub fn len(&self) -> usize {
        self.filters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.filters.is_empty()
    }

    /// Signed (unrectified) responses, one plane per filter.
    pub fn responses(&self, img: &Image) -> Vec<Vec<f64>> {
        let (w, h) = (img.width(), img.height());
        let gray: Vec<f64> = img.pixels().chunks_exact(3).map(|p| luma([p[0], p[1], p[2]])).collect();
        self.filters
            .iter()
            .map(|f| match *f {
                Filter::Gaussian { sigma } => {
                    let g = gaussian(sigma);
                    separable(&gray, w, h, &g, &g)
                }
                Filter::OrientedDerivative { sigma, angle_deg } => {
                    let g = gaussian(sigma);
                    let d = gaussian_derivative(sigma);
                    let gx = separable(&gray, w, h, &d, &g);
                    let gy = separable(&gray, w, h, &g, &d);
                    let (sin, cos) = angle_deg.to_radians().sin_cos();
                    let (sin, cos) = (snap(sin), snap(cos));
                    gx.iter().zip(&gy).map(|(x, y)| cos * x + sin * y).collect()
                }
                Filter::LaplacianOfGaussian { sigma } => {
                    let g = gaussian(sigma);
                    let d2 = gaussian_second_derivative(sigma);
                    let xx = separable(&gray, w, h, &d2, &g);
                    let yy = separable(&gray, w, h, &g, &d2);
                    xx.iter().zip(&yy).map(|(a, b)| a + b).collect()
                }
            })
            .collect()
    }
}
