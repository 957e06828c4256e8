//! Loss collection under a frozen reference model, two-component mixture
//! fitting on log-losses, ID posteriors and hard splitting.

mod gmm;
mod posterior;
mod records;

pub use gmm::{
    fit_gmm_em, fit_gmm_em_traced, gaussian_pdf, EmSettings, GmmParams, LossSpace, SIGMA_FLOOR,
};
pub use posterior::{normalized_loss_values, posterior_id, split_hard, Normalization};
pub use records::{
    collect_log_losses, log_loss, read_loss_dump, render_loss_dump, write_loss_dump, LossRecord,
    LOSS_EPS,
};
