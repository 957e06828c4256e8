use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;

use super::randaug::{rand_augment, MAX_MAGNITUDE};
use super::transforms::CUTOUT_FILL;
use super::{AugOp, LabeledSample, Origin, Raster};
use crate::error::{Error, Result};
use crate::seeding;

/// Pad width of the standard random crop.
pub const CROP_PAD: i32 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StrategyKind {
    Standard,
    RandAugment,
    Jigsaw,
    Rotation,
    Cutout,
}

impl StrategyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StrategyKind::Standard => "standard",
            StrategyKind::RandAugment => "rand_augment",
            StrategyKind::Jigsaw => "jigsaw",
            StrategyKind::Rotation => "rotation",
            StrategyKind::Cutout => "cutout",
        }
    }

    /// Negative augmentations produce out-of-distribution samples by design.
    pub fn is_negative(self) -> bool {
        matches!(self, StrategyKind::Jigsaw | StrategyKind::Rotation)
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "standard" => StrategyKind::Standard,
            "rand_augment" => StrategyKind::RandAugment,
            "jigsaw" => StrategyKind::Jigsaw,
            "rotation" => StrategyKind::Rotation,
            "cutout" => StrategyKind::Cutout,
            _ => return Err(Error::InvalidArgument(format!("unknown strategy `{s}`"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AugmentStrategy {
    pub kind: StrategyKind,
    pub n_ops: usize,
    pub magnitude: u8,
    pub grid_k: usize,
    pub cut_size: usize,
    /// Chance that the strategy transform fires for one sample draw.
    pub p: f64,
}

impl Default for AugmentStrategy {
    fn default() -> Self {
        Self {
            kind: StrategyKind::Standard,
            n_ops: 2,
            magnitude: 10,
            grid_k: 2,
            cut_size: 8,
            p: 1.0,
        }
    }
}

impl AugmentStrategy {
    pub fn standard() -> Self {
        Self::default()
    }

    pub fn of(kind: StrategyKind, p: f64) -> Self {
        Self {
            kind,
            p,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::InvalidArgument(format!("p = {} outside [0, 1]", self.p)));
        }
        if self.grid_k < 2 {
            return Err(Error::InvalidArgument(format!("grid_k = {} < 2", self.grid_k)));
        }
        if self.magnitude > MAX_MAGNITUDE {
            return Err(Error::InvalidArgument(format!(
                "magnitude = {} > {MAX_MAGNITUDE}",
                self.magnitude
            )));
        }
        Ok(())
    }

    /// Draws and applies the strategy's own transform, without standard aug.
    fn transform<R: Rng + ?Sized>(&self, img: &Raster, rng: &mut R) -> Result<(Raster, Vec<AugOp>)> {
        let op = match self.kind {
            StrategyKind::Standard => return Ok((img.clone(), Vec::new())),
            StrategyKind::RandAugment => {
                return Ok(rand_augment(img, self.n_ops, self.magnitude, rng));
            }
            StrategyKind::Jigsaw => {
                let cells = self.grid_k * self.grid_k;
                let mut perm: Vec<usize> = (0..cells).collect();
                // the identity would silently produce an in-distribution sample
                while perm.iter().enumerate().all(|(i, &p)| i == p) {
                    perm.shuffle(rng);
                }
                AugOp::Jigsaw {
                    grid: self.grid_k,
                    perm,
                }
            }
            StrategyKind::Rotation => AugOp::Rotate {
                k: rng.random_range(1..=3),
            },
            StrategyKind::Cutout => AugOp::Cutout {
                size: self.cut_size,
                row: rng.random_range(0..img.height()),
                col: rng.random_range(0..img.width()),
                fill: CUTOUT_FILL,
            },
        };
        let out = op.apply(img)?;
        Ok((out, vec![op]))
    }
}

/// Zero-padded random crop followed by a coin-flip horizontal flip.
pub fn apply_standard<R: Rng + ?Sized>(img: &Raster, rng: &mut R) -> (Raster, Vec<AugOp>) {
    let crop = AugOp::Crop {
        dy: rng.random_range(-CROP_PAD..=CROP_PAD),
        dx: rng.random_range(-CROP_PAD..=CROP_PAD),
    };
    let mut out = crop.apply(img).expect("crop is total");
    let mut log = vec![crop];
    if rng.random_bool(0.5) {
        out = AugOp::HFlip.apply(&out).expect("flip is total");
        log.push(AugOp::HFlip);
    }
    (out, log)
}

/// Draws one augmented view of an original sample. The strategy transform
/// fires with probability `strategy.p`; standard augmentation always follows.
pub fn apply_strategy(
    sample: &LabeledSample,
    strategy: &AugmentStrategy,
    seed: u64,
) -> Result<LabeledSample> {
    let mut rng = seeding::rng(seed);
    let fired = rng.random::<f64>() < strategy.p;
    let (img, mut log) = if fired {
        strategy.transform(&sample.image, &mut rng)?
    } else {
        (sample.image.clone(), Vec::new())
    };
    let (img, std_log) = apply_standard(&img, &mut rng);
    let origin = if log.is_empty() {
        Origin::Original
    } else {
        Origin::Augmented
    };
    log.extend(std_log);
    Ok(LabeledSample {
        image: img,
        label: sample.label,
        sample_id: sample.sample_id,
        origin,
        aug_log: log,
    })
}
