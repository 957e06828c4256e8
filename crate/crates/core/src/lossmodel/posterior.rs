use super::gmm::{GmmParams, LossSpace};
use super::records::{log_loss, LossRecord};
use crate::error::{Error, Result};

/// Standardization `(loss - mean) / std` for the normalized-loss ablation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Normalization {
    pub mean: f64,
    pub std: f64,
}

impl Normalization {
    pub fn apply(&self, raw: f64) -> f64 {
        (raw - self.mean) / self.std
    }
}

impl GmmParams {
    /// Maps a raw loss into the space the mixture was fitted in.
    pub fn to_fit_space(&self, raw_loss: f64) -> f64 {
        match self.space {
            LossSpace::LogLoss => log_loss(raw_loss),
            LossSpace::NormalizedLoss => {
                let mean = self.norm_mean.unwrap_or(0.0);
                let std = self.norm_std.unwrap_or(1.0);
                (raw_loss - mean) / std
            }
        }
    }

    /// Posterior of the ID component for a value already in fit space.
    pub fn posterior_of_value(&self, x: f64) -> f64 {
        let (l0, l1) = self.component_log_densities(x);
        1.0 / (1.0 + (l1 - l0).exp())
    }
}

/// `pi0 phi0 / (pi0 phi0 + pi1 phi1)` evaluated at the transformed loss.
pub fn posterior_id(params: &GmmParams, raw_loss: f64) -> f64 {
    params.posterior_of_value(params.to_fit_space(raw_loss))
}

/// Partitions records into (ID, OOD); a record is ID when its posterior is
/// at least `tau`.
pub fn split_hard(
    records: &[LossRecord],
    params: &GmmParams,
    tau: f64,
) -> (Vec<LossRecord>, Vec<LossRecord>) {
    debug_assert!(tau > 0.0 && tau < 1.0);
    records
        .iter()
        .cloned()
        .partition(|r| posterior_id(params, r.raw_loss) >= tau)
}

/// Raw losses standardized to zero mean and unit (population) deviation.
pub fn normalized_loss_values(records: &[LossRecord]) -> Result<(Vec<f64>, Normalization)> {
    if records.len() < 2 {
        return Err(Error::TooFewValues {
            needed: 2,
            got: records.len(),
        });
    }
    let n = records.len() as f64;
    let mean = records.iter().map(|r| r.raw_loss).sum::<f64>() / n;
    let var = records
        .iter()
        .map(|r| (r.raw_loss - mean).powi(2))
        .sum::<f64>()
        / n;
    let std = var.sqrt();
    if !(std > 0.0) {
        return Err(Error::ZeroVariance);
    }
    let norm = Normalization { mean, std };
    Ok((records.iter().map(|r| norm.apply(r.raw_loss)).collect(), norm))
}
