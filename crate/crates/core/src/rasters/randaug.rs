//! RandAugment over a fixed ten-op subset of integer raster operations.
//!
//! Magnitude runs 0..=30. Every parameterized op is the identity at 0 and at
//! its strongest at 30, interpolated linearly in between. Draw order per op:
//! one uniform index into the op list, then for brightness/contrast/sharpness
//! one sign bit, and for translate an axis bit (x when true) followed by a
//! sign bit.

use rand::Rng;

use super::{AugOp, Raster};

pub const MAX_MAGNITUDE: u8 = 30;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RandOp {
    Identity,
    AutoContrast,
    Equalize,
    Invert,
    Solarize,
    Posterize,
    Brightness,
    Contrast,
    Sharpness,
    Translate,
}

pub const RAND_OPS: [RandOp; 10] = [
    RandOp::Identity,
    RandOp::AutoContrast,
    RandOp::Equalize,
    RandOp::Invert,
    RandOp::Solarize,
    RandOp::Posterize,
    RandOp::Brightness,
    RandOp::Contrast,
    RandOp::Sharpness,
    RandOp::Translate,
];

impl RandOp {
    /// Whether magnitude 0 makes this op the identity.
    pub fn is_calibrated(self) -> bool {
        !matches!(
            self,
            RandOp::AutoContrast | RandOp::Equalize | RandOp::Invert
        )
    }

    /// Draws any op-specific randomness and fixes the parameters.
    pub fn realize<R: Rng + ?Sized>(
        self,
        magnitude: u8,
        height: usize,
        width: usize,
        rng: &mut R,
    ) -> AugOp {
        let frac = f64::from(magnitude.min(MAX_MAGNITUDE)) / f64::from(MAX_MAGNITUDE);
        let signed_factor = |rng: &mut R| {
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            1.0 + sign * 0.9 * frac
        };
        match self {
            RandOp::Identity => AugOp::Identity,
            RandOp::AutoContrast => AugOp::AutoContrast,
            RandOp::Equalize => AugOp::Equalize,
            RandOp::Invert => AugOp::Invert,
            RandOp::Solarize => AugOp::Solarize {
                threshold: (256.0 * (1.0 - frac)).round() as u16,
            },
            RandOp::Posterize => AugOp::Posterize {
                bits: 8 - (7.0 * frac).round() as u8,
            },
            RandOp::Brightness => AugOp::Brightness {
                factor: signed_factor(rng),
            },
            RandOp::Contrast => AugOp::Contrast {
                factor: signed_factor(rng),
            },
            RandOp::Sharpness => AugOp::Sharpness {
                factor: signed_factor(rng),
            },
            RandOp::Translate => {
                let along_x = rng.random_bool(0.5);
                let sign = if rng.random_bool(0.5) { 1 } else { -1 };
                let extent = if along_x { width } else { height };
                let amount = sign * (0.3 * frac * extent as f64).round() as i32;
                if along_x {
                    AugOp::Translate { dx: amount, dy: 0 }
                } else {
                    AugOp::Translate { dx: 0, dy: amount }
                }
            }
        }
    }
}

/// Applies `n_ops` ops drawn with replacement from [`RAND_OPS`].
pub fn rand_augment<R: Rng + ?Sized>(
    img: &Raster,
    n_ops: usize,
    magnitude: u8,
    rng: &mut R,
) -> (Raster, Vec<AugOp>) {
    rand_augment_with(img, &RAND_OPS, n_ops, magnitude, rng)
}

/// As [`rand_augment`] but drawing from a caller-supplied op list.
pub fn rand_augment_with<R: Rng + ?Sized>(
    img: &Raster,
    ops: &[RandOp],
    n_ops: usize,
    magnitude: u8,
    rng: &mut R,
) -> (Raster, Vec<AugOp>) {
    let mut out = img.clone();
    let mut log = Vec::with_capacity(n_ops);
    if ops.is_empty() {
        return (out, log);
    }
    for _ in 0..n_ops {
        let op = ops[rng.random_range(0..ops.len())];
        let realized = op.realize(magnitude, out.height(), out.width(), rng);
        out = realized
            .apply(&out)
            .expect("rand-augment ops are total on valid rasters");
        log.push(realized);
    }
    (out, log)
}
