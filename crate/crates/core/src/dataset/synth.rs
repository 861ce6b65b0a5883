use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::augment::sample_rng;
use crate::dataset::sample::Sample;
use crate::dataset::ClassIndexMask;
use crate::error::{config_err, Result};
use crate::model::{
    BACKGROUND, BEARING, BRACING, CORROSION, DECK, FLOOR_BEAM, GIRDER, NON_CORROSION, SUBSTRUCTURE,
};
use crate::nn::{FeatureMap, Shape};

const ELEMENT_COLORS: [[f32; 3]; 7] = [
    [0.15, 0.15, 0.18], // bearing
    [0.95, 0.85, 0.30], // bracing
    [0.62, 0.62, 0.62], // deck
    [0.25, 0.35, 0.75], // floor beam
    [0.20, 0.55, 0.45], // girder
    [0.85, 0.80, 0.72], // substructure
    [0.62, 0.78, 0.95], // background (sky, top of gradient)
];
const SKY_BOTTOM: [f32; 3] = [0.74, 0.86, 0.98];
const RUST: [f32; 3] = [0.50, 0.20, 0.08];

/// Generator knobs plus the frequency bands its output is expected to hit.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub height: usize,
    pub width: usize,
    pub noise_std: f64,
    /// Probability that each of the pier, bracing, and floor beam appears.
    pub lower_element_probability: f64,
    /// Probability that an element instance receives no corrosion.
    pub clean_probability: f64,
    /// Expected per-class pixel frequency over many samples, element classes.
    pub element_frequency_bands: [(f64, f64); 7],
    /// Expected corrosion pixel frequency over many samples.
    pub corrosion_frequency_band: (f64, f64),
}

impl SynthConfig {
    pub fn new(height: usize, width: usize) -> Self {
        SynthConfig {
            height,
            width,
            noise_std: 0.03,
            lower_element_probability: 0.9,
            clean_probability: 0.25,
            element_frequency_bands: [
                (0.01, 0.05),
                (0.03, 0.12),
                (0.14, 0.22),
                (0.02, 0.10),
                (0.08, 0.18),
                (0.04, 0.14),
                (0.35, 0.60),
            ],
            corrosion_frequency_band: (0.10, 0.25),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.height < 16 || self.width < 16 {
            return Err(config_err!(
                "synthetic images must be at least 16x16, got {}x{}",
                self.height,
                self.width
            ));
        }
        Ok(())
    }
}

/// One planted element region and its exact corrosion pixel count.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PlantedInstance {
    pub class: u8,
    pub area: u64,
    pub corroded: u64,
}

impl PlantedInstance {
    pub fn ratio(&self) -> f64 {
        self.corroded as f64 / self.area as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthScene {
    pub sample: Sample,
    /// Per pixel: 0 for background, `i + 1` for `instances[i]`.
    pub instance_map: Vec<u8>,
    pub instances: Vec<PlantedInstance>,
}

/// `count` scenes with ids `0..count`, each drawn from its own seeded stream.
pub fn synth_generate(count: usize, size: (usize, usize), seed: u64) -> Result<Vec<Sample>> {
    Ok(synth_scenes(count, &SynthConfig::new(size.0, size.1), seed)?
        .into_iter()
        .map(|s| s.sample)
        .collect())
}

pub fn synth_scenes(count: usize, cfg: &SynthConfig, seed: u64) -> Result<Vec<SynthScene>> {
    cfg.validate()?;
    (0..count as u32).map(|id| synth_scene(id, cfg, seed)).collect()
}

pub fn synth_scene(id: u32, cfg: &SynthConfig, seed: u64) -> Result<SynthScene> {
    cfg.validate()?;
    let mut rng = sample_rng(seed ^ 0x5EED_5CE0E, id);
    let mut canvas = Canvas::new(cfg.height, cfg.width);
    layout(&mut canvas, cfg, &mut rng);
    let defect = plant_corrosion(&canvas, cfg, &mut rng);
    let image = render(&canvas, &defect, cfg, &mut rng);
    let mut instances: Vec<PlantedInstance> = canvas
        .classes
        .iter()
        .map(|&class| PlantedInstance {
            class,
            area: 0,
            corroded: 0,
        })
        .collect();
    for (i, &inst) in canvas.instance.iter().enumerate() {
        if inst > 0 {
            let p = &mut instances[inst as usize - 1];
            p.area += 1;
            p.corroded += u64::from(defect.data()[i] == CORROSION);
        }
    }
    let element = ClassIndexMask::new(cfg.height, cfg.width, canvas.element)?;
    let sample = Sample::new(id, image, element, defect)?;
    Ok(SynthScene {
        sample,
        instance_map: canvas.instance,
        instances,
    })
}

struct Canvas {
    height: usize,
    width: usize,
    element: Vec<u8>,
    instance: Vec<u8>,
    classes: Vec<u8>,
}

impl Canvas {
    fn new(height: usize, width: usize) -> Self {
        Canvas {
            height,
            width,
            element: vec![BACKGROUND; height * width],
            instance: vec![0; height * width],
            classes: Vec::new(),
        }
    }

    /// Paints `class` over still-background pixels selected by `inside`.
    fn paint(&mut self, class: u8, rows: (usize, usize), cols: (usize, usize), inside: impl Fn(usize, usize) -> bool) {
        let id = self.classes.len() as u8 + 1;
        let mut any = false;
        for y in rows.0..rows.1.min(self.height) {
            for x in cols.0..cols.1.min(self.width) {
                let i = y * self.width + x;
                if self.element[i] == BACKGROUND && inside(y, x) {
                    self.element[i] = class;
                    self.instance[i] = id;
                    any = true;
                }
            }
        }
        if any {
            self.classes.push(class);
        }
    }

    fn rect(&mut self, class: u8, rows: (usize, usize), cols: (usize, usize)) {
        self.paint(class, rows, cols, |_, _| true);
    }
}

fn frac(rng: &mut ChaCha8Rng, lo: f64, hi: f64, of: usize) -> f64 {
    rng.random_range(lo..hi) * of as f64
}

/// Layout coordinates are multiples of this many pixels, so region edges
/// fall on the boundaries of a stride-`grid` feature map.
pub fn layout_grid(height: usize, width: usize) -> usize {
    match height.min(width) {
        64.. => 4,
        32.. => 2,
        _ => 1,
    }
}

fn snap(v: f64, g: usize) -> usize {
    ((v / g as f64).round() as usize * g).max(g)
}

fn layout(c: &mut Canvas, cfg: &SynthConfig, rng: &mut ChaCha8Rng) {
    let (h, w) = (c.height, c.width);
    let g = layout_grid(h, w);
    let deck_h = snap(frac(rng, 0.14, 0.22, h), g).max(2);
    c.rect(DECK, (0, deck_h), (0, w));

    let girder_h = snap(frac(rng, 0.12, 0.18, h), g).max(2);
    let left = (frac(rng, 0.0, 0.08, w) / g as f64).round() as usize * g;
    let right = w - (frac(rng, 0.0, 0.08, w) / g as f64).round() as usize * g;
    c.rect(GIRDER, (deck_h, deck_h + girder_h), (left, right));

    let top = deck_h + girder_h;
    let below = h - top;
    let mut slots = [0u8, 1, 2];
    for i in (1..slots.len()).rev() {
        slots.swap(i, rng.random_range(0..=i));
    }
    let edge = |k: usize| if k == 3 { w } else { (k * w / 3) / g * g };
    for (k, &kind) in slots.iter().enumerate() {
        let (x0, x1) = (edge(k), edge(k + 1));
        if !rng.random_bool(cfg.lower_element_probability) {
            continue;
        }
        let sw = x1 - x0;
        let offset = |rng: &mut ChaCha8Rng, room: usize| rng.random_range(0..=room / g) * g;
        match kind {
            0 => {
                let pier_w = snap(frac(rng, 0.55, 0.8, sw), g).clamp(2, sw);
                let px = x0 + offset(rng, sw - pier_w);
                let bearing_h = snap(frac(rng, 0.10, 0.15, h), g).max(2);
                let bearing_w = snap(frac(rng, 0.6, 0.9, pier_w), g).clamp(2, pier_w);
                let bx = px + (pier_w - bearing_w) / 2 / g * g;
                c.rect(BEARING, (top, top + bearing_h), (bx, bx + bearing_w));
                c.rect(SUBSTRUCTURE, (top + bearing_h, h), (px, px + pier_w));
            }
            1 => {
                // A post-and-rail cross.
                let margin = snap(0.05 * h as f64, g);
                let (y0, y1) = (top + margin, h - margin);
                let span = y1 - y0;
                let post_w = snap(frac(rng, 0.25, 0.4, sw), g).clamp(2, sw);
                let post_x = x0 + offset(rng, sw - post_w);
                let rail_h = snap(frac(rng, 0.2, 0.3, span), g).clamp(2, span);
                let rail_y = y0 + offset(rng, span - rail_h);
                c.paint(BRACING, (y0, y1), (x0, x1), |y, x| {
                    (post_x..post_x + post_w).contains(&x) || (rail_y..rail_y + rail_h).contains(&y)
                });
            }
            _ => {
                let beam_w = snap(frac(rng, 0.35, 0.55, sw), g).clamp(2, sw);
                let bx = x0 + offset(rng, sw - beam_w);
                let beam_h = snap(frac(rng, 0.45, 0.75, below), g).clamp(2, below);
                c.rect(FLOOR_BEAM, (top, top + beam_h), (bx, bx + beam_w));
            }
        }
    }
}

/// One rectangular rust patch per instance, clipped to that instance. Patch
/// sides scale with the square root of a target coverage drawn from one of
/// the Fair / Poor / Severe ranges, or no patch at all.
fn plant_corrosion(c: &Canvas, cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> ClassIndexMask {
    let g = layout_grid(c.height, c.width);
    let mut defect = ClassIndexMask::filled(c.height, c.width, NON_CORROSION);
    for inst in 1..=c.classes.len() as u8 {
        let (mut y0, mut y1, mut x0, mut x1) = (usize::MAX, 0, usize::MAX, 0);
        for y in 0..c.height {
            for x in 0..c.width {
                if c.instance[y * c.width + x] == inst {
                    y0 = y0.min(y);
                    y1 = y1.max(y + 1);
                    x0 = x0.min(x);
                    x1 = x1.max(x + 1);
                }
            }
        }
        if rng.random_bool(cfg.clean_probability) {
            continue;
        }
        let target = match rng.random_range(0..3) {
            0 => rng.random_range(0.06..0.24),
            1 => rng.random_range(0.28..0.48),
            _ => rng.random_range(0.55..0.85),
        };
        let side = |n: usize| snap(n as f64 * f64::sqrt(target), g).clamp(1, n);
        let (ph, pw) = (side(y1 - y0), side(x1 - x0));
        let py = y0 + rng.random_range(0..=(y1 - y0 - ph) / g) * g;
        let px = x0 + rng.random_range(0..=(x1 - x0 - pw) / g) * g;
        for y in py..py + ph {
            for x in px..px + pw {
                if c.instance[y * c.width + x] == inst {
                    defect.set(y, x, CORROSION);
                }
            }
        }
    }
    defect
}

fn render(c: &Canvas, defect: &ClassIndexMask, cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> FeatureMap<f32> {
    let (h, w) = (c.height, c.width);
    let gain: f32 = rng.random_range(0.9..1.1);
    let noise = Normal::new(0.0, cfg.noise_std).expect("finite noise std");
    let mut img = FeatureMap::zeros(Shape::new(1, 3, h, w));
    for y in 0..h {
        let t = y as f32 / (h - 1) as f32;
        for x in 0..w {
            let i = y * w + x;
            let class = c.element[i] as usize;
            let base: [f32; 3] = if class == BACKGROUND as usize {
                std::array::from_fn(|k| ELEMENT_COLORS[class][k] * (1.0 - t) + SKY_BOTTOM[k] * t)
            } else if defect.data()[i] == CORROSION {
                std::array::from_fn(|k| 0.8 * RUST[k] + 0.2 * ELEMENT_COLORS[class][k])
            } else {
                ELEMENT_COLORS[class]
            };
            for (k, b) in base.iter().enumerate() {
                let v = b * gain + noise.sample(rng) as f32;
                img.set(0, k, y, x, v.clamp(0.0, 1.0));
            }
        }
    }
    img
}
