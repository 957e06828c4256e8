use std::fmt;
use std::str::FromStr;

use super::transforms as t;
use super::Raster;
use crate::error::{Error, Result};

/// A realized transform with every parameter needed to replay it.
///
/// Serialized as `name(param=value,...)`; jigsaw permutations are written
/// with `-` separators, e.g. `jigsaw(grid=2,perm=1-0-3-2)`.
#[derive(Clone, Debug, PartialEq)]
pub enum AugOp {
    Identity,
    AutoContrast,
    Equalize,
    Invert,
    Solarize { threshold: u16 },
    Posterize { bits: u8 },
    Brightness { factor: f64 },
    Contrast { factor: f64 },
    Sharpness { factor: f64 },
    Translate { dx: i32, dy: i32 },
    /// Zero-padded crop window offset of the standard augmentation.
    Crop { dy: i32, dx: i32 },
    HFlip,
    Rotate { k: u8 },
    Jigsaw { grid: usize, perm: Vec<usize> },
    Cutout {
        size: usize,
        row: usize,
        col: usize,
        fill: u8,
    },
}

impl AugOp {
    pub fn name(&self) -> &'static str {
        match self {
            AugOp::Identity => "identity",
            AugOp::AutoContrast => "autocontrast",
            AugOp::Equalize => "equalize",
            AugOp::Invert => "invert",
            AugOp::Solarize { .. } => "solarize",
            AugOp::Posterize { .. } => "posterize",
            AugOp::Brightness { .. } => "brightness",
            AugOp::Contrast { .. } => "contrast",
            AugOp::Sharpness { .. } => "sharpness",
            AugOp::Translate { .. } => "translate",
            AugOp::Crop { .. } => "crop",
            AugOp::HFlip => "hflip",
            AugOp::Rotate { .. } => "rotate",
            AugOp::Jigsaw { .. } => "jigsaw",
            AugOp::Cutout { .. } => "cutout",
        }
    }

    /// True for the crop/flip pair that every sample receives.
    pub fn is_standard(&self) -> bool {
        matches!(self, AugOp::Crop { .. } | AugOp::HFlip)
    }

    pub fn apply(&self, img: &Raster) -> Result<Raster> {
        Ok(match self {
            AugOp::Identity => img.clone(),
            AugOp::AutoContrast => t::autocontrast(img),
            AugOp::Equalize => t::equalize(img),
            AugOp::Invert => t::invert(img),
            AugOp::Solarize { threshold } => t::solarize(img, *threshold),
            AugOp::Posterize { bits } => t::posterize(img, *bits),
            AugOp::Brightness { factor } => t::adjust_brightness(img, *factor),
            AugOp::Contrast { factor } => t::adjust_contrast(img, *factor),
            AugOp::Sharpness { factor } => t::sharpness(img, *factor),
            AugOp::Translate { dx, dy } => t::shift(img, *dy, *dx, t::CUTOUT_FILL),
            AugOp::Crop { dy, dx } => t::shift(img, -dy, -dx, 0),
            AugOp::HFlip => t::hflip(img),
            AugOp::Rotate { k } => t::rotate_quarter(img, *k),
            AugOp::Jigsaw { grid, perm } => t::jigsaw_shuffle(img, *grid, perm)?,
            AugOp::Cutout {
                size,
                row,
                col,
                fill,
            } => t::cutout(img, *size, (*row, *col), *fill),
        })
    }
}

impl fmt::Display for AugOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.name())?;
        match self {
            AugOp::Identity
            | AugOp::AutoContrast
            | AugOp::Equalize
            | AugOp::Invert
            | AugOp::HFlip => {}
            AugOp::Solarize { threshold } => write!(f, "threshold={threshold}")?,
            AugOp::Posterize { bits } => write!(f, "bits={bits}")?,
            AugOp::Brightness { factor }
            | AugOp::Contrast { factor }
            | AugOp::Sharpness { factor } => write!(f, "factor={factor}")?,
            AugOp::Translate { dx, dy } => write!(f, "dx={dx},dy={dy}")?,
            AugOp::Crop { dy, dx } => write!(f, "dy={dy},dx={dx}")?,
            AugOp::Rotate { k } => write!(f, "k={k}")?,
            AugOp::Jigsaw { grid, perm } => {
                let p: Vec<String> = perm.iter().map(|v| v.to_string()).collect();
                write!(f, "grid={grid},perm={}", p.join("-"))?
            }
            AugOp::Cutout {
                size,
                row,
                col,
                fill,
            } => write!(f, "size={size},row={row},col={col},fill={fill}")?,
        }
        write!(f, ")")
    }
}

impl FromStr for AugOp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::BadDescriptor(s.to_string());
        let s = s.trim();
        let open = s.find('(').ok_or_else(bad)?;
        let inner = s[open + 1..].strip_suffix(')').ok_or_else(bad)?;
        let name = &s[..open];
        let params: Vec<(&str, &str)> = if inner.is_empty() {
            Vec::new()
        } else {
            inner
                .split(',')
                .map(|kv| kv.split_once('=').ok_or_else(bad))
                .collect::<Result<_>>()?
        };
        let get = |key: &str| -> Result<&str> {
            params
                .iter()
                .find(|(k, _)| *k == key)
                .map(|(_, v)| *v)
                .ok_or_else(bad)
        };
        fn num<T: FromStr>(v: &str, s: &str) -> Result<T> {
            v.parse().map_err(|_| Error::BadDescriptor(s.to_string()))
        }
        Ok(match name {
            "identity" => AugOp::Identity,
            "autocontrast" => AugOp::AutoContrast,
            "equalize" => AugOp::Equalize,
            "invert" => AugOp::Invert,
            "hflip" => AugOp::HFlip,
            "solarize" => AugOp::Solarize {
                threshold: num(get("threshold")?, s)?,
            },
            "posterize" => AugOp::Posterize {
                bits: num(get("bits")?, s)?,
            },
            "brightness" => AugOp::Brightness {
                factor: num(get("factor")?, s)?,
            },
            "contrast" => AugOp::Contrast {
                factor: num(get("factor")?, s)?,
            },
            "sharpness" => AugOp::Sharpness {
                factor: num(get("factor")?, s)?,
            },
            "translate" => AugOp::Translate {
                dx: num(get("dx")?, s)?,
                dy: num(get("dy")?, s)?,
            },
            "crop" => AugOp::Crop {
                dy: num(get("dy")?, s)?,
                dx: num(get("dx")?, s)?,
            },
            "rotate" => AugOp::Rotate {
                k: num(get("k")?, s)?,
            },
            "jigsaw" => AugOp::Jigsaw {
                grid: num(get("grid")?, s)?,
                perm: get("perm")?
                    .split('-')
                    .map(|v| num(v, s))
                    .collect::<Result<_>>()?,
            },
            "cutout" => AugOp::Cutout {
                size: num(get("size")?, s)?,
                row: num(get("row")?, s)?,
                col: num(get("col")?, s)?,
                fill: num(get("fill")?, s)?,
            },
            _ => return Err(bad()),
        })
    }
}

/// One descriptor per line.
pub fn render_aug_log(log: &[AugOp]) -> String {
    log.iter().map(|op| format!("{op}\n")).collect()
}

pub fn parse_aug_log(text: &str) -> Result<Vec<AugOp>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(str::parse)
        .collect()
}

/// Re-applies a logged transform sequence to the original raster.
pub fn replay(original: &Raster, log: &[AugOp]) -> Result<Raster> {
    log.iter().try_fold(original.clone(), |img, op| op.apply(&img))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn descriptor_text() {
        let ops = vec![
            AugOp::Jigsaw {
                grid: 2,
                perm: vec![1, 0, 3, 2],
            },
            AugOp::Brightness { factor: 1.27 },
            AugOp::HFlip,
            AugOp::Crop { dy: -1, dx: 2 },
        ];
        let text = render_aug_log(&ops);
        assert_eq!(
            text,
            "jigsaw(grid=2,perm=1-0-3-2)\nbrightness(factor=1.27)\nhflip()\ncrop(dy=-1,dx=2)\n"
        );
        assert_eq!(parse_aug_log(&text).unwrap(), ops);
    }

    #[test]
    fn rejects_garbage() {
        for bad in ["", "rotate", "rotate(k=)", "spin(k=1)", "crop(dy=1)", "rotate(k=1"] {
            assert!(bad.parse::<AugOp>().is_err(), "{bad}");
        }
    }
}
