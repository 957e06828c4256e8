//! Hyperparameter sweeps and smoothing-strength ablations over seeds.

use serde::Serialize;

use super::experiment::{run_all_seeds, ExperimentConfig, SweepParam, Variant, UNIFORM_OPTIMAL_GRID};
use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::smoothing::AlphaMode;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub param: String,
    pub value: f64,
    pub config_hash: String,
    pub accuracies: Vec<f64>,
    pub mean_acc: f64,
    pub std_acc: f64,
    /// Seeds that failed, with their errors. A failed seed does not stop
    /// the remaining grid points.
    pub failures: Vec<String>,
}

pub fn with_param(base: &ExperimentConfig, param: SweepParam, value: f64) -> ExperimentConfig {
    let mut cfg = base.clone();
    match param {
        SweepParam::P => cfg.strategy.p = value,
        SweepParam::Alpha => cfg.alpha_max = value,
    }
    cfg
}

/// Runs every grid point over all seeds of `base`.
pub fn sweep(base: &ExperimentConfig, param: SweepParam, grid: &[f64], write: bool) -> Result<Vec<SweepRow>> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument(format!("empty {param} grid")));
    }
    grid.iter()
        .map(|&value| {
            let cfg = with_param(base, param, value);
            let row = match run_all_seeds(&cfg, write) {
                Ok((_, s)) => SweepRow {
                    param: param.to_string(),
                    value,
                    config_hash: s.config_hash,
                    accuracies: s.accuracies,
                    mean_acc: s.mean_acc,
                    std_acc: s.std_acc,
                    failures: s.failures,
                },
                Err(e) => SweepRow {
                    param: param.to_string(),
                    value,
                    config_hash: cfg.hash(),
                    accuracies: Vec::new(),
                    mean_acc: f64::NAN,
                    std_acc: f64::NAN,
                    failures: vec![e.to_string()],
                },
            };
            Ok(row)
        })
        .collect()
}

/// Grid value with the highest mean accuracy; ties keep the earlier value.
pub fn best_value(rows: &[SweepRow]) -> Option<f64> {
    rows.iter()
        .filter(|r| r.mean_acc.is_finite())
        .fold(None::<&SweepRow>, |best, r| match best {
            Some(b) if b.mean_acc >= r.mean_acc => Some(b),
            _ => Some(r),
        })
        .map(|r| r.value)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TwoPhaseReport {
    pub p_rows: Vec<SweepRow>,
    pub best_p: f64,
    pub alpha_rows: Vec<SweepRow>,
    pub best_alpha: f64,
}

/// Sweeps `p` with `alpha_max` fixed at its base value, then sweeps
/// `alpha_max` at the best `p`.
pub fn two_phase_sweep(base: &ExperimentConfig, write: bool) -> Result<TwoPhaseReport> {
    let p_rows = sweep(base, SweepParam::P, &base.sweep.p_grid, write)?;
    let best_p = best_value(&p_rows).ok_or_else(|| Error::InvalidArgument("every p grid point failed".into()))?;
    let at_p = with_param(base, SweepParam::P, best_p);
    let alpha_rows = sweep(&at_p, SweepParam::Alpha, &base.sweep.alpha_grid, write)?;
    let best_alpha = best_value(&alpha_rows)
        .ok_or_else(|| Error::InvalidArgument("every alpha grid point failed".into()))?;
    Ok(TwoPhaseReport {
        p_rows,
        best_p,
        alpha_rows,
        best_alpha,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AblationRow {
    pub name: String,
    pub config_hash: String,
    pub accuracies: Vec<f64>,
    pub mean_acc: f64,
    pub std_acc: f64,
    /// Constant picked by the grid search, for `uniform_optimal`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_const: Option<f64>,
    pub failures: Vec<String>,
}

fn ablation_row(name: &str, cfg: &ExperimentConfig, write: bool) -> Result<AblationRow> {
    let (_, s) = run_all_seeds(cfg, write)?;
    Ok(AblationRow {
        name: name.to_string(),
        config_hash: s.config_hash,
        accuracies: s.accuracies,
        mean_acc: s.mean_acc,
        std_acc: s.std_acc,
        alpha_const: cfg.alpha_const,
        failures: s.failures,
    })
}

/// One row per strength-assignment mode under the log-loss mixture, plus
/// the normalized-loss mixture with the default mode. `uniform_optimal`
/// searches the fixed constant grid and reports the best constant.
pub fn ablate(base: &ExperimentConfig, write: bool) -> Result<Vec<AblationRow>> {
    let mut rows = Vec::new();
    for mode in AlphaMode::ALL {
        let mut cfg = base.clone();
        cfg.variant = Variant::ResmoothLog;
        cfg.alpha_mode = mode;
        if mode == AlphaMode::UniformOptimal {
            let mut best: Option<AblationRow> = None;
            for c in UNIFORM_OPTIMAL_GRID {
                cfg.alpha_const = Some(c);
                let row = ablation_row(mode.as_str(), &cfg, write)?;
                if best.as_ref().is_none_or(|b| row.mean_acc > b.mean_acc) {
                    best = Some(row);
                }
            }
            rows.extend(best);
        } else {
            cfg.alpha_const = None;
            rows.push(ablation_row(mode.as_str(), &cfg, write)?);
        }
    }
    let mut cfg = base.clone();
    cfg.variant = Variant::ResmoothNorm;
    cfg.alpha_mode = AlphaMode::Resmooth;
    cfg.alpha_const = None;
    rows.push(ablation_row("resmooth_norm", &cfg, write)?);
    Ok(rows)
}

/// Writes one JSON object per row.
pub fn write_report<T: Serialize>(path: &std::path::Path, rows: &[T]) -> Result<()> {
    let mut text = String::new();
    for r in rows {
        text.push_str(&serde_json::to_string(r)?);
        text.push('\n');
    }
    write_atomic(path, text.as_bytes())
}
