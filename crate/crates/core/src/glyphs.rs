//! Procedurally rendered glyph datasets.
//!
//! Every glyph family is symmetric under horizontal flips, so the standard
//! crop-and-flip augmentation never changes a label. In orientation-sensitive
//! mode the classes come in pairs that differ only by a quarter or half turn,
//! which turns large-angle rotation into a true negative augmentation.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rasters::{LabeledSample, Raster};
use crate::seeding;

/// Additive noise presets (standard deviation as a fraction of full scale).
pub const NOISE_LOW: f64 = 0.10;
pub const NOISE_HIGH: f64 = 0.9;

#[derive(Clone, Debug, PartialEq)]
pub struct GlyphSpec {
    pub classes: usize,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub size: usize,
    pub noise: f64,
    pub orientation_sensitive: bool,
    pub seed: u64,
}

impl Default for GlyphSpec {
    fn default() -> Self {
        Self {
            classes: 10,
            train_per_class: 100,
            test_per_class: 50,
            size: 16,
            noise: NOISE_LOW,
            orientation_sensitive: false,
            seed: 0,
        }
    }
}

type Point = (f64, f64);

/// A glyph as a list of polylines in the unit box `[-1, 1]^2`, y pointing
/// down.
fn family_strokes(family: usize) -> Vec<Vec<Point>> {
    let arc = |cx: f64, cy: f64, r: f64, from: f64, to: f64| -> Vec<Point> {
        (0..=16)
            .map(|i| {
                let t = from + (to - from) * i as f64 / 16.0;
                (cx + r * t.cos(), cy + r * t.sin())
            })
            .collect()
    };
    match family {
        // horizontal bar
        0 => vec![vec![(-0.9, 0.0), (0.9, 0.0)]],
        // vertical bar
        1 => vec![vec![(0.0, -0.9), (0.0, 0.9)]],
        // T
        2 => vec![vec![(-0.85, -0.75), (0.85, -0.75)], vec![(0.0, -0.75), (0.0, 0.9)]],
        // upside-down T
        3 => vec![vec![(-0.85, 0.75), (0.85, 0.75)], vec![(0.0, 0.75), (0.0, -0.9)]],
        // cup
        4 => vec![arc(0.0, -0.2, 0.8, 0.0, PI)],
        // cap
        5 => vec![arc(0.0, 0.2, 0.8, PI, 2.0 * PI)],
        // chevron pointing down
        6 => vec![vec![(-0.85, -0.6), (0.0, 0.7), (0.85, -0.6)]],
        // chevron pointing up
        7 => vec![vec![(-0.85, 0.6), (0.0, -0.7), (0.85, 0.6)]],
        // plus
        8 => vec![vec![(-0.9, 0.0), (0.9, 0.0)], vec![(0.0, -0.9), (0.0, 0.9)]],
        // diagonal cross
        9 => vec![vec![(-0.8, -0.8), (0.8, 0.8)], vec![(-0.8, 0.8), (0.8, -0.8)]],
        // square outline
        10 => vec![vec![(-0.75, -0.75), (0.75, -0.75), (0.75, 0.75), (-0.75, 0.75), (-0.75, -0.75)]],
        // circle
        11 => vec![arc(0.0, 0.0, 0.8, 0.0, 2.0 * PI)],
        // triangle
        12 => vec![vec![(0.0, -0.85), (0.85, 0.75), (-0.85, 0.75), (0.0, -0.85)]],
        _ => unreachable!("unknown glyph family {family}"),
    }
}

/// Families used by each mode, in class order.
const GENERAL_FAMILIES: [usize; 10] = [0, 1, 8, 9, 10, 11, 12, 2, 4, 6];
const ORIENTED_FAMILIES: [usize; 8] = [0, 1, 2, 3, 4, 5, 6, 7];

impl GlyphSpec {
    pub fn families(&self) -> &'static [usize] {
        if self.orientation_sensitive {
            &ORIENTED_FAMILIES
        } else {
            &GENERAL_FAMILIES
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 || self.classes > self.families().len() {
            return Err(Error::InvalidArgument(format!(
                "class count {} outside [2, {}]",
                self.classes,
                self.families().len()
            )));
        }
        if self.size != 16 && self.size != 32 {
            return Err(Error::InvalidArgument(format!(
                "glyph size {} must be 16 or 32",
                self.size
            )));
        }
        if !(self.noise >= 0.0) {
            return Err(Error::InvalidArgument("noise must be >= 0".into()));
        }
        Ok(())
    }
}

fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    let (cx, cy) = (a.0 + t * dx, a.1 + t * dy);
    ((p.0 - cx).powi(2) + (p.1 - cy).powi(2)).sqrt()
}

/// Renders one glyph with random scale, position, tilt, stroke width and
/// contrast, then adds Gaussian pixel noise.
pub fn render_glyph<R: Rng + ?Sized>(family: usize, size: usize, noise: f64, rng: &mut R) -> Raster {
    let s = size as f64;
    let scale = s * 0.36 * rng.random_range(0.8..1.05);
    let tilt = rng.random_range(-0.12..0.12);
    let (ox, oy) = (
        s / 2.0 - 0.5 + rng.random_range(-1.5..1.5),
        s / 2.0 - 0.5 + rng.random_range(-1.5..1.5),
    );
    let half_width = s / 20.0 * rng.random_range(0.8..1.3);
    let ink = rng.random_range(0.75..1.0);
    let (sin, cos) = f64::sin_cos(tilt);
    let strokes: Vec<Vec<Point>> = family_strokes(family)
        .into_iter()
        .map(|line| {
            line.into_iter()
                .map(|(x, y)| {
                    let (rx, ry) = (x * cos - y * sin, x * sin + y * cos);
                    (ox + rx * scale, oy + ry * scale)
                })
                .collect()
        })
        .collect();
    let normal = Normal::new(0.0, noise.max(0.0)).expect("finite noise");
    let mut pixels = Vec::with_capacity(size * size);
    for r in 0..size {
        for c in 0..size {
            let p = (c as f64, r as f64);
            let d = strokes
                .iter()
                .flat_map(|line| line.windows(2).map(move |w| segment_distance(p, w[0], w[1])))
                .fold(f64::INFINITY, f64::min);
            let coverage = (half_width + 0.5 - d).clamp(0.0, 1.0);
            let v = coverage * ink + if noise > 0.0 { normal.sample(rng) } else { 0.0 };
            pixels.push((v * 255.0).round().clamp(0.0, 255.0) as u8);
        }
    }
    Raster::new(size, size, 1, pixels).expect("consistent glyph raster")
}

fn render_split(spec: &GlyphSpec, split: u64, per_class: usize) -> Result<Dataset> {
    let families = spec.families();
    let mut samples = Vec::with_capacity(per_class * spec.classes);
    for _ in 0..per_class {
        for (class, &family) in families.iter().enumerate().take(spec.classes) {
            let id = samples.len() as u64;
            let mut rng = seeding::rng_for(spec.seed, &[split, id]);
            let img = render_glyph(family, spec.size, spec.noise, &mut rng);
            samples.push(LabeledSample::original(img, class, id));
        }
    }
    Dataset::new(spec.size, spec.size, 1, spec.classes, samples)
}

/// Train and test splits. Classes are interleaved, so any prefix of a split
/// is close to class-balanced.
pub fn generate_glyphs(spec: &GlyphSpec) -> Result<(Dataset, Dataset)> {
    spec.validate()?;
    Ok((
        render_split(spec, 0x7a41, spec.train_per_class)?,
        render_split(spec, 0x7e57, spec.test_per_class)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rasters::{hflip, rotate_quarter};

    #[test]
    fn deterministic_and_balanced() {
        let spec = GlyphSpec {
            train_per_class: 7,
            test_per_class: 3,
            seed: 5,
            ..GlyphSpec::default()
        };
        let (a, b) = generate_glyphs(&spec).unwrap();
        let (a2, b2) = generate_glyphs(&spec).unwrap();
        assert_eq!(a.encode(), a2.encode());
        assert_eq!(b.encode(), b2.encode());
        let mut hist = vec![0; spec.classes];
        a.samples.iter().for_each(|s| hist[s.label] += 1);
        assert!(hist.iter().all(|&n| n == 7));
        assert_eq!(b.len(), 30);
        for s in &a.samples {
            assert!(b.samples.iter().all(|t| t.image != s.image));
        }
    }

    #[test]
    fn families_are_flip_symmetric() {
        // Noise-free, untilted, centered renders are mirror images of themselves.
        for fam in 0..13 {
            let strokes = family_strokes(fam);
            for line in &strokes {
                for &(x, y) in line {
                    let mirrored = (-x, y);
                    let hit = strokes.iter().any(|l| {
                        l.windows(2)
                            .any(|w| segment_distance(mirrored, w[0], w[1]) < 1e-9)
                    });
                    assert!(hit, "family {fam} point {x},{y}");
                }
            }
        }
        let mut rng = seeding::rng(0);
        let img = render_glyph(2, 16, 0.0, &mut rng);
        assert_ne!(hflip(&img), rotate_quarter(&img, 2));
    }

    #[test]
    fn rejects_bad_spec() {
        for spec in [
            GlyphSpec { classes: 1, ..GlyphSpec::default() },
            GlyphSpec { classes: 11, ..GlyphSpec::default() },
            GlyphSpec { classes: 9, orientation_sensitive: true, ..GlyphSpec::default() },
            GlyphSpec { size: 20, ..GlyphSpec::default() },
        ] {
            assert!(generate_glyphs(&spec).is_err());
        }
    }
}
