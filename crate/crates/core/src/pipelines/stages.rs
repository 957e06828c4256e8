//! Pretraining, mixture estimation, per-sample smoothed training and
//! negative-augmentation training.

use super::metrics::auroc;
use super::train::{train_stream, BatchObjective, PlainObjective, StepPlan, TrainOutcome};
use crate::error::{Error, Result};
use crate::lossmodel::{
    collect_log_losses, fit_gmm_em, normalized_loss_values, posterior_id, EmSettings, GmmParams,
    LossRecord, LossSpace,
};
use crate::netcore::{Architecture, Batch, ModelState, TrainConfig};
use crate::rasters::{apply_strategy, AugmentStrategy, LabeledSample, Origin};
use crate::seeding::{self, stream, Rng};
use crate::smoothing::{assign_alphas_with, plain_ce, AlphaPolicy};

/// Trains the reference model on standard-augmented data only.
pub fn pretrain(
    data: &[LabeledSample],
    test: Option<&[LabeledSample]>,
    arch: Architecture,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    let init = ModelState::init(arch, cfg.seed);
    train_stream(
        init,
        data,
        test,
        &AugmentStrategy::standard(),
        cfg,
        &mut PlainObjective,
    )
}

/// One augmented draw per sample. Ids are shifted past the largest input id
/// so the draw can be pooled with the originals.
pub fn draw_augmented(
    data: &[LabeledSample],
    strategy: &AugmentStrategy,
    seed: u64,
) -> Result<Vec<LabeledSample>> {
    let offset = data.iter().map(|s| s.sample_id).max().map_or(0, |m| m + 1);
    data.iter()
        .map(|s| {
            let mut out = apply_strategy(s, strategy, seeding::derive(seed, &[stream::DPRIME, s.sample_id]))?;
            out.sample_id += offset;
            Ok(out)
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct Estimate {
    pub gmm: GmmParams,
    /// Loss records over the pooled originals and augmented draw.
    pub records: Vec<LossRecord>,
}

/// Fits the loss mixture on `originals` pooled with `augmented`, under the
/// frozen reference model.
pub fn estimate_stage(
    reference: &ModelState,
    originals: &[LabeledSample],
    augmented: &[LabeledSample],
    space: LossSpace,
    em: &EmSettings,
) -> Result<Estimate> {
    let pooled: Vec<LabeledSample> = originals.iter().chain(augmented).cloned().collect();
    let records = collect_log_losses(reference, &pooled)?;
    let gmm = match space {
        LossSpace::LogLoss => {
            let values: Vec<f64> = records.iter().map(|r| r.log_loss).collect();
            fit_gmm_em(&values, em)?
        }
        LossSpace::NormalizedLoss => {
            let (values, norm) = normalized_loss_values(&records)?;
            let mut g = fit_gmm_em(&values, em)?;
            g.space = LossSpace::NormalizedLoss;
            g.norm_mean = Some(norm.mean);
            g.norm_std = Some(norm.std);
            g
        }
    };
    Ok(Estimate { gmm, records })
}

/// ID posteriors of a batch under the frozen reference model.
pub fn batch_posteriors(
    reference: &ModelState,
    gmm: &GmmParams,
    batch: &[LabeledSample],
) -> Result<Vec<f64>> {
    let preds = reference.forward(&Batch::from_samples(batch)?)?;
    Ok(preds
        .iter()
        .zip(batch)
        .map(|(p, s)| posterior_id(gmm, plain_ce(&p.probabilities, s.label)))
        .collect())
}

/// Detection AUROC of `1 - w` against the augmented-origin labels.
pub fn detection_auroc(
    reference: &ModelState,
    gmm: &GmmParams,
    samples: &[LabeledSample],
) -> Result<Option<f64>> {
    let w = batch_posteriors(reference, gmm, samples)?;
    let scores: Vec<f64> = w.iter().map(|w| 1.0 - w).collect();
    let labels: Vec<bool> = samples.iter().map(|s| s.origin == Origin::Augmented).collect();
    Ok(auroc(&scores, &labels))
}

/// Re-estimation of the mixture at the start of every epoch after the first.
pub struct Refit<'a> {
    pub originals: &'a [LabeledSample],
    pub strategy: AugmentStrategy,
    pub seed: u64,
    pub em: EmSettings,
}

pub struct ResmoothObjective<'a> {
    reference: &'a ModelState,
    gmm: GmmParams,
    policy: AlphaPolicy,
    rng: Rng,
    track_detection: bool,
    scores: Vec<f64>,
    labels: Vec<bool>,
    refit: Option<Refit<'a>>,
}

impl<'a> ResmoothObjective<'a> {
    pub fn new(
        reference: &'a ModelState,
        gmm: GmmParams,
        policy: AlphaPolicy,
        seed: u64,
        track_detection: bool,
    ) -> Self {
        Self {
            reference,
            gmm,
            policy,
            rng: seeding::rng_for(seed, &[stream::ALPHA]),
            track_detection,
            scores: Vec::new(),
            labels: Vec::new(),
            refit: None,
        }
    }

    pub fn with_refit(mut self, refit: Refit<'a>) -> Self {
        self.refit = Some(refit);
        self
    }

    pub fn gmm(&self) -> &GmmParams {
        &self.gmm
    }
}

impl BatchObjective for ResmoothObjective<'_> {
    fn plan(&mut self, batch: &[LabeledSample]) -> Result<StepPlan> {
        let w = batch_posteriors(self.reference, &self.gmm, batch)?;
        if self.track_detection {
            self.scores.extend(w.iter().map(|w| 1.0 - w));
            self.labels
                .extend(batch.iter().map(|s| s.origin == Origin::Augmented));
        }
        Ok(StepPlan::Smoothed(assign_alphas_with(
            &w,
            &self.policy,
            &mut self.rng,
        )?))
    }

    fn begin_epoch(&mut self, epoch: usize) -> Result<()> {
        if let (Some(refit), true) = (&self.refit, epoch > 0) {
            let draw = draw_augmented(
                refit.originals,
                &refit.strategy,
                seeding::derive(refit.seed, &[epoch as u64]),
            )?;
            self.gmm = estimate_stage(self.reference, refit.originals, &draw, self.gmm.space, &refit.em)?.gmm;
        }
        Ok(())
    }

    fn end_epoch(&mut self) -> Option<f64> {
        let a = auroc(&self.scores, &self.labels);
        self.scores.clear();
        self.labels.clear();
        a
    }
}

/// Trains a fresh model with per-sample strengths derived from posteriors
/// under the frozen reference model and mixture.
#[allow(clippy::too_many_arguments)]
pub fn resmooth_train(
    data: &[LabeledSample],
    test: Option<&[LabeledSample]>,
    strategy: &AugmentStrategy,
    arch: Architecture,
    cfg: &TrainConfig,
    objective: &mut ResmoothObjective<'_>,
) -> Result<TrainOutcome> {
    train_stream(ModelState::init(arch, cfg.seed), data, test, strategy, cfg, objective)
}

/// Treats every sample whose strategy transform fired in this draw as OOD.
pub struct NegativeObjective {
    pub alpha: f64,
}

impl BatchObjective for NegativeObjective {
    fn plan(&mut self, batch: &[LabeledSample]) -> Result<StepPlan> {
        Ok(StepPlan::Negative {
            ood: batch.iter().map(|s| s.origin == Origin::Augmented).collect(),
            alpha: self.alpha,
        })
    }
}

pub fn nda_train(
    data: &[LabeledSample],
    test: Option<&[LabeledSample]>,
    strategy: &AugmentStrategy,
    alpha: f64,
    arch: Architecture,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    if !strategy.kind.is_negative() {
        return Err(Error::InvalidArgument(format!(
            "{} is not a negative augmentation",
            strategy.kind
        )));
    }
    train_stream(
        ModelState::init(arch, cfg.seed),
        data,
        test,
        strategy,
        cfg,
        &mut NegativeObjective { alpha },
    )
}
