//! Binary model files: magic `RSMK`, format version (u16), architecture tag
//! (u8), initialization seed (u64), shape table, then little-endian f64
//! weights followed by momentum slots, tensors in declaration order.
//!
//! Shape table: tensor count (u16), then per tensor its rank (u8) and each
//! dimension (u32). All integers little-endian.

use std::path::Path;

use super::model::{Architecture, ModelState};
use crate::error::{Error, Result};
use crate::io::write_atomic;

const MAGIC: &[u8; 4] = b"RSMK";
const VERSION: u16 = 1;

pub fn encode_model(model: &ModelState) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(model.architecture.tag());
    out.extend_from_slice(&model.rng_seed.to_le_bytes());
    let shapes = model.architecture.shapes();
    out.extend_from_slice(&(shapes.len() as u16).to_le_bytes());
    for (shape, _) in &shapes {
        out.push(shape.len() as u8);
        for &d in shape {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
    }
    for v in model.weights.iter().chain(&model.momentum).flatten() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.buf.len() {
            return Err(Error::Format("truncated model file".into()));
        }
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        Ok(self
            .take(n * 8)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<ModelState> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Format("bad model magic".into()));
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported model version {version}")));
    }
    let tag = r.u8()?;
    let rng_seed = r.u64()?;
    let count = r.u16()? as usize;
    let mut shapes = Vec::with_capacity(count);
    for _ in 0..count {
        let rank = r.u8()? as usize;
        let dims = (0..rank)
            .map(|_| r.u32().map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        shapes.push(dims);
    }
    let architecture = match (tag, shapes.as_slice()) {
        (0, [w, b]) if w.len() == 2 && b.len() == 1 => Architecture::SoftmaxLinear {
            inputs: w[1],
            classes: w[0],
        },
        (1, [w1, b1, w2, b2]) if w1.len() == 2 && w2.len() == 2 && b1.len() == 1 && b2.len() == 1 => {
            Architecture::Mlp1 {
                inputs: w1[1],
                hidden: w1[0],
                classes: w2[0],
            }
        }
        _ => return Err(Error::Format(format!("unknown architecture tag {tag}"))),
    };
    let expected: Vec<Vec<usize>> = architecture.shapes().into_iter().map(|(s, _)| s).collect();
    if expected != shapes {
        return Err(Error::Format("inconsistent shape table".into()));
    }
    let sizes: Vec<usize> = shapes.iter().map(|s| s.iter().product()).collect();
    let weights = sizes.iter().map(|&n| r.f64s(n)).collect::<Result<Vec<_>>>()?;
    let momentum = sizes.iter().map(|&n| r.f64s(n)).collect::<Result<Vec<_>>>()?;
    if r.pos != bytes.len() {
        return Err(Error::Format("trailing bytes in model file".into()));
    }
    Ok(ModelState {
        architecture,
        weights,
        momentum,
        rng_seed,
    })
}

pub fn write_model(path: &Path, model: &ModelState) -> Result<()> {
    write_atomic(path, &encode_model(model))
}

pub fn read_model(path: &Path) -> Result<ModelState> {
    decode_model(&std::fs::read(path)?)
}
