use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use super::model::{Gradients, ModelState};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Schedule {
    Constant,
    Cosine,
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Schedule::Constant => "constant",
            Schedule::Cosine => "cosine",
        })
    }
}

impl FromStr for Schedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(Schedule::Constant),
            "cosine" => Ok(Schedule::Cosine),
            _ => Err(Error::InvalidArgument(format!("unknown schedule `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr0: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub schedule: Schedule,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 64,
            lr0: 0.05,
            momentum: 0.9,
            weight_decay: 5e-4,
            schedule: Schedule::Cosine,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr0 > 0.0) {
            return Err(Error::InvalidArgument(format!("lr0 = {} must be > 0", self.lr0)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidArgument(format!(
                "momentum = {} outside [0, 1)",
                self.momentum
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be >= 1".into()));
        }
        Ok(())
    }
}

/// `lr0` for the constant schedule, `lr0 * (1 + cos(pi * t / T)) / 2` for cosine.
pub fn learning_rate(cfg: &TrainConfig, step: usize, total_steps: usize) -> f64 {
    match cfg.schedule {
        Schedule::Constant => cfg.lr0,
        Schedule::Cosine => {
            let frac = step as f64 / total_steps.max(1) as f64;
            cfg.lr0 * (1.0 + (PI * frac).cos()) / 2.0
        }
    }
}

/// `v <- momentum * v + (g + weight_decay * w)`, then `w <- w - lr(t) * v`.
pub fn sgd_step(
    state: &mut ModelState,
    grads: &Gradients,
    step: usize,
    total_steps: usize,
    cfg: &TrainConfig,
) {
    let lr = learning_rate(cfg, step, total_steps);
    for ((w, v), g) in state
        .weights
        .iter_mut()
        .zip(state.momentum.iter_mut())
        .zip(&grads.0)
    {
        debug_assert_eq!(w.len(), g.len());
        for ((wi, vi), &gi) in w.iter_mut().zip(v.iter_mut()).zip(g) {
            *vi = cfg.momentum * *vi + (gi + cfg.weight_decay * *wi);
            *wi -= lr * *vi;
        }
    }
}
