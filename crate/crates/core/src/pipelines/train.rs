//! The shared mini-batch training loop. Every pipeline stage differs only in
//! how it turns an augmented batch into an update, expressed as a
//! [`BatchObjective`].

use rand::seq::SliceRandom;

use super::metrics::EpochRecord;
use crate::error::{Error, Result};
use crate::netcore::{
    evaluate, learning_rate, loss_and_grad, loss_and_grad_neg, sgd_step, Batch, ModelState,
    TrainConfig,
};
use crate::rasters::{apply_strategy, AugmentStrategy, LabeledSample};
use crate::seeding::{self, stream};

/// What to do with one augmented batch.
pub enum StepPlan {
    /// Mean smoothed cross-entropy with one strength per sample.
    Smoothed(Vec<f64>),
    /// Group-normalized objective; `true` marks the OOD group.
    Negative { ood: Vec<bool>, alpha: f64 },
    /// Plain cross-entropy on a subset of the batch.
    Subset(Vec<usize>),
    Skip,
}

pub trait BatchObjective {
    fn plan(&mut self, batch: &[LabeledSample]) -> Result<StepPlan>;

    fn begin_epoch(&mut self, _epoch: usize) -> Result<()> {
        Ok(())
    }

    /// Detection AUROC accumulated over the epoch, when ground truth exists.
    fn end_epoch(&mut self) -> Option<f64> {
        None
    }
}

/// Unsmoothed cross-entropy on every sample.
pub struct PlainObjective;

impl BatchObjective for PlainObjective {
    fn plan(&mut self, batch: &[LabeledSample]) -> Result<StepPlan> {
        Ok(StepPlan::Smoothed(vec![0.0; batch.len()]))
    }
}

/// One constant strength for every sample.
pub struct ConstantSmoothing(pub f64);

impl BatchObjective for ConstantSmoothing {
    fn plan(&mut self, batch: &[LabeledSample]) -> Result<StepPlan> {
        Ok(StepPlan::Smoothed(vec![self.0; batch.len()]))
    }
}

/// Seed for the augmentation draw of one sample in one epoch.
pub fn augment_seed(run_seed: u64, epoch: usize, sample_id: u64) -> u64 {
    seeding::derive(run_seed, &[stream::AUGMENT, epoch as u64, sample_id])
}

pub struct TrainOutcome {
    pub model: ModelState,
    pub epochs: Vec<EpochRecord>,
    /// Objective value of every applied update, in order.
    pub step_losses: Vec<f64>,
}

/// Trains `model` for `cfg.epochs` epochs over fresh augmentation draws.
///
/// Each epoch visits the data in a seeded shuffled order; each sample is
/// augmented with a seed derived from (run seed, epoch, sample id). Skipped
/// steps still advance the learning-rate schedule.
pub fn train_stream(
    mut model: ModelState,
    data: &[LabeledSample],
    test: Option<&[LabeledSample]>,
    strategy: &AugmentStrategy,
    cfg: &TrainConfig,
    objective: &mut dyn BatchObjective,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    strategy.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let steps_per_epoch = data.len().div_ceil(cfg.batch_size);
    let total_steps = cfg.epochs * steps_per_epoch;
    let mut step = 0;
    let mut records = Vec::with_capacity(cfg.epochs);
    let mut step_losses = Vec::with_capacity(total_steps);
    let mut order: Vec<usize> = (0..data.len()).collect();

    for epoch in 0..cfg.epochs {
        objective.begin_epoch(epoch)?;
        order.sort_unstable();
        order.shuffle(&mut seeding::rng_for(cfg.seed, &[stream::SHUFFLE, epoch as u64]));
        let lr = learning_rate(cfg, step, total_steps);
        let (mut loss_sum, mut loss_steps, mut consumed) = (0.0, 0usize, 0usize);

        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<LabeledSample> = chunk
                .iter()
                .map(|&i| {
                    let s = &data[i];
                    apply_strategy(s, strategy, augment_seed(cfg.seed, epoch, s.sample_id))
                })
                .collect::<Result<_>>()?;
            let update = match objective.plan(&batch)? {
                StepPlan::Smoothed(alphas) => {
                    consumed += batch.len();
                    Some(loss_and_grad(&model, &Batch::from_samples(&batch)?, &alphas)?)
                }
                StepPlan::Negative { ood, alpha } => {
                    consumed += batch.len();
                    Some(loss_and_grad_neg(&model, &Batch::from_samples(&batch)?, &ood, alpha)?)
                }
                StepPlan::Subset(idx) if !idx.is_empty() => {
                    consumed += idx.len();
                    let picked = Batch::from_samples(idx.iter().map(|&i| &batch[i]))?;
                    Some(loss_and_grad(&model, &picked, &vec![0.0; idx.len()])?)
                }
                StepPlan::Subset(_) | StepPlan::Skip => None,
            };
            if let Some((loss, grads)) = update {
                sgd_step(&mut model, &grads, step, total_steps, cfg);
                loss_sum += loss;
                step_losses.push(loss);
                loss_steps += 1;
            }
            step += 1;
        }
        if consumed == 0 {
            return Err(Error::EmptyEpoch { epoch });
        }
        if !model.is_finite() {
            return Err(Error::NonFiniteLoss);
        }
        let test_acc = match test {
            Some(t) if !t.is_empty() => Some(evaluate(&model, t)?.accuracy),
            _ => None,
        };
        records.push(EpochRecord {
            epoch,
            lr,
            train_loss: loss_sum / loss_steps.max(1) as f64,
            test_acc,
            auroc: objective.end_epoch(),
            samples_consumed: consumed,
        });
    }
    Ok(TrainOutcome {
        model,
        epochs: records,
        step_losses,
    })
}
