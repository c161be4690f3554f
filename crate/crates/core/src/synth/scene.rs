use serde::{Deserialize, Serialize};

use super::rng::SynthRng;
use crate::error::{Error, Result};
use crate::eval::GroundTruth;
use crate::geom::BBox;
use crate::image::Image;

const MAX_PLACEMENT_ATTEMPTS: usize = 1000;
pub(crate) const PER_BOX_TRIES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pattern {
    Stripes,
    Checker,
}

/// Appearance generator for one category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryStyle {
    pub name: String,
    /// Base hue in `[0, 1)`.
    pub hue: f64,
    pub saturation: f64,
    pub value: f64,
    /// Width over height.
    pub aspect: f64,
    pub pattern: Pattern,
}

impl CategoryStyle {
    fn new(name: &str, hue: f64, aspect: f64, pattern: Pattern) -> Self {
        CategoryStyle {
            name: name.to_string(),
            hue,
            saturation: 0.75,
            value: 0.85,
            aspect,
            pattern,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub width: usize,
    pub height: usize,
    pub categories: Vec<CategoryStyle>,
    /// Inclusive range of categories present in one scene.
    pub categories_per_scene: [usize; 2],
    /// Inclusive range of instances per present category.
    pub instances_per_category: [usize; 2],
    /// Inclusive range of the shorter box side, in pixels.
    pub short_side: [u32; 2],
    /// Relative size jitter between instances of one scene.
    pub size_jitter: f64,
    /// Per-scene hue shift of a category's appearance.
    pub hue_jitter: f64,
    pub occlusion_fraction: f64,
    /// Fraction of the box covered by the occluding stripe.
    pub occlusion_severity: f64,
    pub clutter_patches: usize,
    pub max_pair_iou: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            width: 128,
            height: 128,
            categories: vec![
                CategoryStyle::new("sheep", 0.02, 1.25, Pattern::Checker),
                CategoryStyle::new("bottle", 0.36, 0.6, Pattern::Stripes),
                CategoryStyle::new("car", 0.62, 1.6, Pattern::Stripes),
            ],
            categories_per_scene: [1, 2],
            instances_per_category: [2, 3],
            short_side: [18, 24],
            size_jitter: 0.08,
            hue_jitter: 0.05,
            occlusion_fraction: 0.3,
            occlusion_severity: 0.3,
            clutter_patches: 3,
            max_pair_iou: 0.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("synth config: {m}")));
        if self.width == 0 || self.height == 0 {
            return bad("image size must be positive");
        }
        if self.categories_per_scene[0] > self.categories_per_scene[1]
            || self.instances_per_category[0] > self.instances_per_category[1]
            || self.short_side[0] > self.short_side[1]
        {
            return bad("ranges must be ordered");
        }
        if self.categories_per_scene[1] > self.categories.len() {
            return bad("more categories per scene than categories");
        }
        if self.short_side[0] == 0 {
            return bad("short side must be positive");
        }
        for c in &self.categories {
            if !(c.aspect > 0.0) || !c.aspect.is_finite() {
                return bad("aspect must be positive");
            }
        }
        if !(0.0..=1.0).contains(&self.occlusion_fraction) || !(0.0..1.0).contains(&self.occlusion_severity) {
            return bad("occlusion fraction and severity must lie in [0, 1)");
        }
        if !(0.0..=0.2).contains(&self.max_pair_iou) {
            return bad("max pair IoU must lie in [0, 0.2]");
        }
        if !(0.0..0.5).contains(&self.size_jitter) {
            return bad("size jitter must lie in [0, 0.5)");
        }
        Ok(())
    }

    pub fn style(&self, name: &str) -> Option<&CategoryStyle> {
        self.categories.iter().find(|c| c.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub category: String,
    pub bbox: BBox,
    pub occluded: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub image_id: String,
    pub seed: u64,
    pub image: Image,
    pub instances: Vec<Instance>,
}

impl Scene {
    pub fn ground_truth(&self) -> Vec<GroundTruth> {
        self.instances
            .iter()
            .map(|i| GroundTruth {
                image_id: self.image_id.clone(),
                category: i.category.clone(),
                bbox: i.bbox,
                difficult: false,
            })
            .collect()
    }
}

pub fn scene_id(seed: u64) -> String {
    format!("s{seed:016x}")
}

pub(crate) fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [f64; 3] {
    let h = h.rem_euclid(1.0) * 6.0;
    let i = (h.floor() as usize).min(5);
    let f = h - i as f64;
    let (p, q, t) = (v * (1.0 - s), v * (1.0 - s * f), v * (1.0 - s * (1.0 - f)));
    match i {
        0 => [v, t, p],
        1 => [q, v, p],
        2 => [p, v, t],
        3 => [p, q, v],
        4 => [t, p, v],
        _ => [v, p, q],
    }
}

fn to_u8(c: f64) -> u8 {
    (c * 255.0).round().clamp(0.0, 255.0) as u8
}

fn put(img: &mut Image, x: usize, y: usize, rgb: [f64; 3], noise: &mut SynthRng, amp: f64) {
    let mut px = [0u8; 3];
    for (p, c) in px.iter_mut().zip(rgb) {
        *p = to_u8(c + noise.uniform(-amp, amp));
    }
    img.set_pixel(x, y, px);
}

/// Smooth value noise: random lattice values, bilinearly interpolated.
struct ValueNoise {
    cell: f64,
    cols: usize,
    lattice: Vec<f64>,
}

impl ValueNoise {
    fn new(w: usize, h: usize, cell: usize, rng: &mut SynthRng) -> Self {
        let cols = w / cell + 2;
        let rows = h / cell + 2;
        ValueNoise {
            cell: cell as f64,
            cols,
            lattice: (0..cols * rows).map(|_| rng.next_f64()).collect(),
        }
    }

    fn at(&self, x: usize, y: usize) -> f64 {
        let fx = x as f64 / self.cell;
        let fy = y as f64 / self.cell;
        let (ix, iy) = (fx as usize, fy as usize);
        let (tx, ty) = (fx - ix as f64, fy - iy as f64);
        let l = |cx: usize, cy: usize| self.lattice[cy * self.cols + cx];
        let top = l(ix, iy) * (1.0 - tx) + l(ix + 1, iy) * tx;
        let bot = l(ix, iy + 1) * (1.0 - tx) + l(ix + 1, iy + 1) * tx;
        top * (1.0 - ty) + bot * ty
    }
}

/// Per-scene appearance shared by all instances of one category.
struct Appearance {
    primary: [f64; 3],
    secondary: [f64; 3],
    pattern: Pattern,
    period: f64,
    /// Stripe direction; checkers ignore it.
    dir: (f64, f64),
    phase: f64,
}

impl Appearance {
    fn sample(style: &CategoryStyle, hue_jitter: f64, rng: &mut SynthRng) -> Self {
        let hue = style.hue + rng.uniform(-hue_jitter, hue_jitter);
        let second_hue = hue + rng.uniform(-0.08, 0.08);
        let dirs = [(1.0, 0.0), (0.0, 1.0), (0.7071, 0.7071), (0.7071, -0.7071)];
        Appearance {
            primary: hsv_to_rgb(hue, style.saturation, style.value),
            secondary: hsv_to_rgb(second_hue, style.saturation * 0.6, style.value * 0.55),
            pattern: style.pattern,
            period: rng.uniform(3.0, 7.0),
            dir: dirs[rng.below(dirs.len() as u64) as usize],
            phase: rng.uniform(0.0, 8.0),
        }
    }

    fn color(&self, u: f64, v: f64) -> [f64; 3] {
        let on = match self.pattern {
            Pattern::Stripes => ((u * self.dir.0 + v * self.dir.1 + self.phase) / self.period).floor() as i64,
            Pattern::Checker => {
                ((u + self.phase) / self.period).floor() as i64 + ((v + self.phase) / self.period).floor() as i64
            }
        };
        if on.rem_euclid(2) == 0 {
            self.primary
        } else {
            self.secondary
        }
    }
}

fn random_box(w: u32, h: u32, cfg: &SynthConfig, rng: &mut SynthRng) -> Option<BBox> {
    if w == 0 || h == 0 || w as usize > cfg.width || h as usize > cfg.height {
        return None;
    }
    let x = rng.below((cfg.width - w as usize + 1) as u64) as u32;
    let y = rng.below((cfg.height - h as usize + 1) as u64) as u32;
    Some(BBox { x, y, w, h })
}

/// Places a `w`×`h` box whose IoU with every box in `taken` is at most `max_iou`.
pub(crate) fn place_box(
    w: u32,
    h: u32,
    taken: &[BBox],
    max_iou: f64,
    tries: usize,
    cfg: &SynthConfig,
    rng: &mut SynthRng,
) -> Option<BBox> {
    for _ in 0..tries {
        let b = random_box(w, h, cfg, rng)?;
        if taken.iter().all(|t| t.iou(&b) <= max_iou) {
            return Some(b);
        }
    }
    None
}

pub(crate) fn box_dims(style: &CategoryStyle, short: f64) -> (u32, u32) {
    if style.aspect >= 1.0 {
        ((short * style.aspect).round() as u32, short.round() as u32)
    } else {
        (short.round() as u32, (short / style.aspect).round() as u32)
    }
}

/// One attempt at sizing and placing every instance; `None` when some box does not fit.
fn sample_layout(cfg: &SynthConfig, chosen: &[usize], rng: &mut SynthRng) -> Option<Vec<Instance>> {
    let mut instances: Vec<Instance> = Vec::new();
    for &ci in chosen {
        let style = &cfg.categories[ci];
        let n = rng.range_inclusive(cfg.instances_per_category[0], cfg.instances_per_category[1]);
        let short = rng.uniform(cfg.short_side[0] as f64, cfg.short_side[1] as f64 + 1.0).floor();
        for _ in 0..n {
            let f = 1.0 + rng.uniform(-cfg.size_jitter, cfg.size_jitter);
            let (w, h) = box_dims(style, short * f);
            let taken: Vec<BBox> = instances.iter().map(|i| i.bbox).collect();
            let bbox = place_box(w, h, &taken, cfg.max_pair_iou, PER_BOX_TRIES, cfg, rng)?;
            instances.push(Instance {
                category: style.name.clone(),
                bbox,
                occluded: rng.bernoulli(cfg.occlusion_fraction),
            });
        }
    }
    Some(instances)
}

/// Renders one scene. Everything is a pure function of `cfg` and `seed`.
pub fn generate_scene(cfg: &SynthConfig, seed: u64) -> Result<Scene> {
    cfg.validate()?;
    let mut layout = SynthRng::derive(seed, 1);
    let mut looks = SynthRng::derive(seed, 2);
    let mut pixels = SynthRng::derive(seed, 3);

    // which categories, how many instances, where
    let n_cat = layout.range_inclusive(cfg.categories_per_scene[0], cfg.categories_per_scene[1]);
    let mut pool: Vec<usize> = (0..cfg.categories.len()).collect();
    let mut chosen = Vec::with_capacity(n_cat);
    for _ in 0..n_cat {
        let k = layout.below(pool.len() as u64) as usize;
        chosen.push(pool.swap_remove(k));
    }
    chosen.sort_unstable();

    let appearances: Vec<Appearance> = chosen
        .iter()
        .map(|&ci| Appearance::sample(&cfg.categories[ci], cfg.hue_jitter, &mut looks))
        .collect();
    let mut instances = None;
    for _ in 0..MAX_PLACEMENT_ATTEMPTS {
        instances = sample_layout(cfg, &chosen, &mut layout);
        if instances.is_some() {
            break;
        }
    }
    let instances = instances.ok_or_else(|| {
        Error::Infeasible(format!(
            "no layout within IoU {} after {MAX_PLACEMENT_ATTEMPTS} attempts",
            cfg.max_pair_iou
        ))
    })?;

    let mut img = Image::filled(cfg.width, cfg.height, [0, 0, 0])?;

    // background: low-saturation value noise
    let bg_hue = looks.next_f64();
    let bg_sat = looks.uniform(0.08, 0.2);
    let coarse = ValueNoise::new(cfg.width, cfg.height, 16, &mut looks);
    let fine = ValueNoise::new(cfg.width, cfg.height, 4, &mut looks);
    for y in 0..cfg.height {
        for x in 0..cfg.width {
            let n = 0.7 * coarse.at(x, y) + 0.3 * fine.at(x, y);
            let rgb = hsv_to_rgb(bg_hue + 0.05 * n, bg_sat * (0.5 + n), 0.3 + 0.35 * n);
            put(&mut img, x, y, rgb, &mut pixels, 0.02);
        }
    }

    // clutter: flat, moderately saturated patches that never touch an instance
    let taken: Vec<BBox> = instances.iter().map(|i| i.bbox).collect();
    for _ in 0..cfg.clutter_patches {
        let w = layout.range_inclusive(6, 18) as u32;
        let h = layout.range_inclusive(6, 18) as u32;
        let hue = looks.next_f64();
        let rgb = hsv_to_rgb(hue, 0.45, 0.7);
        if let Some(b) = place_box(w, h, &taken, 0.0, PER_BOX_TRIES, cfg, &mut layout) {
            for y in b.y as usize..b.bottom() as usize {
                for x in b.x as usize..b.right() as usize {
                    put(&mut img, x, y, rgb, &mut pixels, 0.03);
                }
            }
        }
    }

    for inst in &instances {
        let k = chosen
            .iter()
            .position(|&ci| cfg.categories[ci].name == inst.category)
            .expect("instance category is chosen");
        let look = &appearances[k];
        let b = inst.bbox;
        for y in 0..b.h as usize {
            for x in 0..b.w as usize {
                let rgb = look.color(x as f64, y as f64);
                put(&mut img, b.x as usize + x, b.y as usize + y, rgb, &mut pixels, 0.04);
            }
        }
    }

    // occluding stripes: a gray band over one side of the box
    for inst in instances.iter().filter(|i| i.occluded) {
        let b = inst.bbox;
        let side = layout.below(4);
        let gray = layout.uniform(0.35, 0.6);
        let (bw, bh) = (
            ((b.w as f64 * cfg.occlusion_severity).round() as u32).max(1),
            ((b.h as f64 * cfg.occlusion_severity).round() as u32).max(1),
        );
        let band = match side {
            0 => BBox { w: bw, ..b },
            1 => BBox { x: b.x + b.w - bw, w: bw, ..b },
            2 => BBox { h: bh, ..b },
            _ => BBox { y: b.y + b.h - bh, h: bh, ..b },
        };
        for y in band.y as usize..band.bottom() as usize {
            for x in band.x as usize..band.right() as usize {
                put(&mut img, x, y, [gray; 3], &mut pixels, 0.03);
            }
        }
    }

    Ok(Scene {
        image_id: scene_id(seed),
        seed,
        image: img,
        instances,
    })
}
