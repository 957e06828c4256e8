//! Binary dataset files.
//!
//! Layout (integers little-endian): magic `RSDS`, version u16, sample count
//! u32, height u16, width u16, channels u8, class count u16; then per sample
//! a u16 label followed by `height * width * channels` raw u8 pixels. The
//! header is 17 bytes. Sample ids are the zero-based record positions.

use std::path::Path;

use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::rasters::{LabeledSample, Raster};

const MAGIC: &[u8; 4] = b"RSDS";
const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 17;

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub classes: usize,
    pub samples: Vec<LabeledSample>,
}

impl Dataset {
    pub fn new(
        height: usize,
        width: usize,
        channels: usize,
        classes: usize,
        samples: Vec<LabeledSample>,
    ) -> Result<Self> {
        for s in &samples {
            if s.label >= classes {
                return Err(Error::Format(format!(
                    "label {} >= class count {classes}",
                    s.label
                )));
            }
            if (s.image.height(), s.image.width(), s.image.channels()) != (height, width, channels) {
                return Err(Error::Format("sample raster dimensions differ".into()));
            }
        }
        Ok(Self {
            height,
            width,
            channels,
            classes,
            samples,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub fn encode(&self) -> Vec<u8> {
        let px = self.input_dim();
        let mut out = Vec::with_capacity(HEADER_LEN + self.len() * (2 + px));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.len() as u32).to_le_bytes());
        out.extend_from_slice(&(self.height as u16).to_le_bytes());
        out.extend_from_slice(&(self.width as u16).to_le_bytes());
        out.push(self.channels as u8);
        out.extend_from_slice(&(self.classes as u16).to_le_bytes());
        for s in &self.samples {
            out.extend_from_slice(&(s.label as u16).to_le_bytes());
            out.extend_from_slice(s.image.pixels());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
            return Err(Error::Format("not a dataset file".into()));
        }
        let u16_at = |i: usize| u16::from_le_bytes([bytes[i], bytes[i + 1]]) as usize;
        let version = u16_at(4);
        if version != VERSION as usize {
            return Err(Error::Format(format!("unsupported dataset version {version}")));
        }
        let count = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
        let (height, width) = (u16_at(10), u16_at(12));
        let channels = bytes[14] as usize;
        let classes = u16_at(15);
        let px = height * width * channels;
        if bytes.len() != HEADER_LEN + count * (2 + px) {
            return Err(Error::Format(format!(
                "file length {} does not match {count} samples of {px} pixels",
                bytes.len()
            )));
        }
        let samples = bytes[HEADER_LEN..]
            .chunks_exact(2 + px)
            .enumerate()
            .map(|(i, rec)| {
                let label = u16::from_le_bytes([rec[0], rec[1]]) as usize;
                let image = Raster::new(height, width, channels, rec[2..].to_vec())?;
                Ok(LabeledSample::original(image, label, i as u64))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(height, width, channels, classes, samples)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.encode())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::decode(&std::fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn write_then_read(pixels in proptest::collection::vec(any::<u8>(), 0..10), k in 1usize..5) {
            let samples: Vec<LabeledSample> = pixels
                .iter()
                .enumerate()
                .map(|(i, &p)| {
                    LabeledSample::original(Raster::filled(2, 3, 1, p), i % k, i as u64)
                })
                .collect();
            let ds = Dataset::new(2, 3, 1, k, samples).unwrap();
            let bytes = ds.encode();
            prop_assert_eq!(bytes.len(), HEADER_LEN + ds.len() * (2 + 6));
            prop_assert_eq!(Dataset::decode(&bytes).unwrap(), ds);
        }
    }

    #[test]
    fn rejects_bad_labels_and_lengths() {
        let s = LabeledSample::original(Raster::filled(2, 2, 1, 0), 3, 0);
        assert!(Dataset::new(2, 2, 1, 3, vec![s.clone()]).is_err());
        let ds = Dataset::new(2, 2, 1, 4, vec![s]).unwrap();
        let mut bytes = ds.encode();
        bytes.pop();
        assert!(Dataset::decode(&bytes).is_err());
    }
}
