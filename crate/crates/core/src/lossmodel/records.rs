use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::{fmt_f64, write_atomic};
use crate::netcore::{evaluate, ModelState};
use crate::rasters::{LabeledSample, Origin};

/// Floor applied to raw losses before taking the logarithm.
pub const LOSS_EPS: f64 = 1e-12;

#[inline]
pub fn log_loss(raw: f64) -> f64 {
    raw.max(LOSS_EPS).ln()
}

#[derive(Clone, Debug, PartialEq)]
pub struct LossRecord {
    pub sample_id: u64,
    pub raw_loss: f64,
    pub log_loss: f64,
    pub origin: Origin,
}

impl LossRecord {
    pub fn new(sample_id: u64, raw_loss: f64, origin: Origin) -> Self {
        Self {
            sample_id,
            raw_loss,
            log_loss: log_loss(raw_loss),
            origin,
        }
    }
}

/// Plain cross-entropy of every sample under `model`, sorted by sample id.
pub fn collect_log_losses(model: &ModelState, samples: &[LabeledSample]) -> Result<Vec<LossRecord>> {
    let ev = evaluate(model, samples)?;
    let mut records: Vec<LossRecord> = samples
        .iter()
        .zip(ev.losses)
        .map(|(s, l)| LossRecord::new(s.sample_id, l, s.origin))
        .collect();
    records.sort_by_key(|r| r.sample_id);
    Ok(records)
}

pub fn render_loss_dump(records: &[LossRecord]) -> String {
    let mut out = String::from("sample_id,origin,raw_loss,log_loss\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.sample_id,
            r.origin.as_str(),
            fmt_f64(r.raw_loss),
            fmt_f64(r.log_loss)
        ));
    }
    out
}

pub fn write_loss_dump(path: &Path, records: &[LossRecord]) -> Result<()> {
    write_atomic(path, render_loss_dump(records).as_bytes())
}

pub fn read_loss_dump(path: &Path) -> Result<Vec<LossRecord>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("sample_id,origin,raw_loss,log_loss") {
        return Err(Error::Format("loss dump header mismatch".into()));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let bad = || Error::Format(format!("loss dump line {}: `{line}`", i + 2));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 4 {
                return Err(bad());
            }
            let origin = match f[1] {
                "original" => Origin::Original,
                "augmented" => Origin::Augmented,
                _ => return Err(bad()),
            };
            Ok(LossRecord {
                sample_id: f[0].parse().map_err(|_| bad())?,
                origin,
                raw_loss: f[2].parse().map_err(|_| bad())?,
                log_loss: f[3].parse().map_err(|_| bad())?,
            })
        })
        .collect()
}
