//! Raster images, labeled samples and seedable augmentation.

mod ops;
mod randaug;
mod strategy;
mod transforms;

pub use ops::{parse_aug_log, render_aug_log, replay, AugOp};
pub use randaug::{rand_augment, rand_augment_with, RandOp, RAND_OPS};
pub use strategy::{apply_standard, apply_strategy, AugmentStrategy, StrategyKind};
pub use transforms::{
    adjust_brightness, adjust_contrast, autocontrast, cutout, equalize, hflip, invert,
    jigsaw_shuffle, posterize, rotate_quarter, shift, sharpness, solarize, CUTOUT_FILL,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An 8-bit image stored row-major with interleaved channels.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Raster {
    height: usize,
    width: usize,
    channels: usize,
    pixels: Vec<u8>,
}

impl Raster {
    pub fn new(height: usize, width: usize, channels: usize, pixels: Vec<u8>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidRaster(format!(
                "channels must be 1 or 3, got {channels}"
            )));
        }
        if pixels.len() != height * width * channels {
            return Err(Error::InvalidRaster(format!(
                "{} pixels for {height}x{width}x{channels}",
                pixels.len()
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            pixels,
        })
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: u8) -> Self {
        Self {
            height,
            width,
            channels,
            pixels: vec![value; height * width * channels],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize, ch: usize) -> usize {
        (row * self.width + col) * self.channels + ch
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, ch: usize) -> u8 {
        self.pixels[self.index(row, col, ch)]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, ch: usize, value: u8) {
        let i = self.index(row, col, ch);
        self.pixels[i] = value;
    }

    /// Number of scalar inputs a classifier sees for this raster.
    pub fn feature_len(&self) -> usize {
        self.pixels.len()
    }

    /// Intensities scaled to [0, 1], appended to `out`.
    pub fn extend_features(&self, out: &mut Vec<f64>) {
        out.extend(self.pixels.iter().map(|&p| f64::from(p) / 255.0));
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Original,
    Augmented,
}

impl Origin {
    pub fn as_str(self) -> &'static str {
        match self {
            Origin::Original => "original",
            Origin::Augmented => "augmented",
        }
    }
}

/// A raster with its class label and the record of transforms applied to it.
///
/// `origin` is `Augmented` exactly when a non-standard strategy transform
/// fired; standard crop/flip entries may appear in `aug_log` either way.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSample {
    pub image: Raster,
    pub label: usize,
    pub sample_id: u64,
    pub origin: Origin,
    pub aug_log: Vec<AugOp>,
}

impl LabeledSample {
    pub fn original(image: Raster, label: usize, sample_id: u64) -> Self {
        Self {
            image,
            label,
            sample_id,
            origin: Origin::Original,
            aug_log: Vec::new(),
        }
    }
}
