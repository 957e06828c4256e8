//! Collection of augmented ID/OOD sets and the equal-budget comparison of
//! training on each.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;

use super::stages::batch_posteriors;
use super::train::{train_stream, BatchObjective, StepPlan, TrainOutcome};
use crate::error::{Error, Result};
use crate::lossmodel::{posterior_id, GmmParams};
use crate::netcore::{evaluate, Architecture, ModelState, TrainConfig};
use crate::rasters::{apply_strategy, replay, AugmentStrategy, LabeledSample};
use crate::seeding::{self, stream, Rng as SeededRng};
use crate::smoothing::plain_ce;

/// Posterior threshold separating collected ID and OOD samples.
pub const COLLECT_THRESHOLD: f64 = 0.5;

#[derive(Clone, Debug, PartialEq)]
pub struct Collected {
    /// Augmented sample; `sample_id` is the attempt number that produced it.
    pub sample: LabeledSample,
    /// Id of the original it was drawn from.
    pub source_id: u64,
    pub posterior: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DaoodSets {
    pub id: Vec<Collected>,
    pub ood: Vec<Collected>,
    pub attempts: usize,
}

impl DaoodSets {
    pub fn id_samples(&self) -> Vec<LabeledSample> {
        self.id.iter().map(|c| c.sample.clone()).collect()
    }

    pub fn ood_samples(&self) -> Vec<LabeledSample> {
        self.ood.iter().map(|c| c.sample.clone()).collect()
    }
}

/// Rejection-samples augmented views until both sets hold `target` samples.
/// Only originals the reference model classifies correctly are used; a view
/// goes to OOD when its posterior is below 0.5 and to ID when above.
pub fn collect_daood(
    reference: &ModelState,
    gmm: &GmmParams,
    data: &[LabeledSample],
    strategy: &AugmentStrategy,
    target: usize,
    max_attempts: usize,
    seed: u64,
) -> Result<DaoodSets> {
    if target == 0 {
        return Err(Error::InvalidArgument("target count must be >= 1".into()));
    }
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let correct = evaluate(reference, data)?;
    let mut rng = seeding::rng_for(seed, &[stream::COLLECT]);
    let mut sets = DaoodSets {
        id: Vec::with_capacity(target),
        ood: Vec::with_capacity(target),
        attempts: 0,
    };
    while sets.id.len() < target || sets.ood.len() < target {
        if sets.attempts >= max_attempts {
            return Err(Error::BudgetExhausted {
                budget: max_attempts,
                target,
                id_count: sets.id.len(),
                ood_count: sets.ood.len(),
            });
        }
        let attempt = sets.attempts as u64;
        sets.attempts += 1;
        let i = rng.random_range(0..data.len());
        let aug_seed: u64 = rng.random();
        if correct.predicted[i] != data[i].label {
            continue;
        }
        let mut view = apply_strategy(&data[i], strategy, aug_seed)?;
        view.sample_id = attempt;
        let w = batch_posteriors(reference, gmm, std::slice::from_ref(&view))?[0];
        let entry = Collected {
            sample: view,
            source_id: data[i].sample_id,
            posterior: w,
        };
        if w < COLLECT_THRESHOLD && sets.ood.len() < target {
            sets.ood.push(entry);
        } else if w > COLLECT_THRESHOLD && sets.id.len() < target {
            sets.id.push(entry);
        }
    }
    Ok(sets)
}

/// Number of collected entries violating the collection rule: the original
/// must be correctly classified, the logged transforms must reproduce the
/// view, and the posterior must sit on the right side of 0.5.
pub fn audit_daood(
    reference: &ModelState,
    gmm: &GmmParams,
    data: &[LabeledSample],
    sets: &DaoodSets,
) -> Result<usize> {
    let mut violations = 0;
    let groups = [(&sets.ood, true), (&sets.id, false)];
    for (entries, is_ood) in groups {
        for c in entries {
            let original = data
                .iter()
                .find(|s| s.sample_id == c.source_id)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown source id {}", c.source_id)))?;
            let pre = reference.forward_one(original)?;
            let post = reference.forward_one(&c.sample)?;
            let w = posterior_id(gmm, plain_ce(&post.probabilities, c.sample.label));
            let replayed = replay(&original.image, &c.sample.aug_log)?;
            let side_ok = if is_ood {
                w < COLLECT_THRESHOLD
            } else {
                w > COLLECT_THRESHOLD
            };
            if pre.argmax() != original.label || replayed != c.sample.image || !side_ok {
                violations += 1;
            }
        }
    }
    Ok(violations)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FairFlag {
    Daood,
    Daid,
    Mixture,
}

impl FairFlag {
    pub const ALL: [FairFlag; 3] = [FairFlag::Daid, FairFlag::Daood, FairFlag::Mixture];
}

impl fmt::Display for FairFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FairFlag::Daood => "daood",
            FairFlag::Daid => "daid",
            FairFlag::Mixture => "mixture",
        })
    }
}

impl FromStr for FairFlag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "daood" => Ok(FairFlag::Daood),
            "daid" => Ok(FairFlag::Daid),
            "mixture" | "mix" => Ok(FairFlag::Mixture),
            _ => Err(Error::InvalidArgument(format!("unknown fair-compare flag `{s}`"))),
        }
    }
}

/// Splits each batch by posterior and trains on `m = min(cap, |ID|, |OOD|)`
/// samples taken from the flagged source.
pub struct FairObjective<'a> {
    reference: &'a ModelState,
    gmm: &'a GmmParams,
    flag: FairFlag,
    cap: usize,
    tau: f64,
    rng: SeededRng,
}

impl<'a> FairObjective<'a> {
    pub fn new(
        reference: &'a ModelState,
        gmm: &'a GmmParams,
        flag: FairFlag,
        cap: usize,
        tau: f64,
        seed: u64,
    ) -> Self {
        Self {
            reference,
            gmm,
            flag,
            cap,
            tau,
            rng: seeding::rng_for(seed, &[stream::SELECT]),
        }
    }
}

impl BatchObjective for FairObjective<'_> {
    fn plan(&mut self, batch: &[LabeledSample]) -> Result<StepPlan> {
        let w = batch_posteriors(self.reference, self.gmm, batch)?;
        let (id, ood): (Vec<usize>, Vec<usize>) = (0..batch.len()).partition(|&i| w[i] >= self.tau);
        let m = self.cap.min(id.len()).min(ood.len());
        if m == 0 {
            return Ok(StepPlan::Skip);
        }
        let pool: Vec<usize> = match self.flag {
            FairFlag::Daood => ood,
            FairFlag::Daid => id,
            FairFlag::Mixture => (0..batch.len()).collect(),
        };
        let mut picked: Vec<usize> = index::sample(&mut self.rng, pool.len(), m)
            .into_iter()
            .map(|k| pool[k])
            .collect();
        picked.sort_unstable();
        Ok(StepPlan::Subset(picked))
    }
}

#[allow(clippy::too_many_arguments)]
pub fn fair_compare(
    reference: &ModelState,
    gmm: &GmmParams,
    data: &[LabeledSample],
    test: Option<&[LabeledSample]>,
    strategy: &AugmentStrategy,
    flag: FairFlag,
    cap: usize,
    tau: f64,
    arch: Architecture,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    let mut objective = FairObjective::new(reference, gmm, flag, cap, tau, cfg.seed);
    train_stream(ModelState::init(arch, cfg.seed), data, test, strategy, cfg, &mut objective)
}
