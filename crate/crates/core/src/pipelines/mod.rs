//! End-to-end training pipelines built on one shared training loop.

mod daood;
mod experiment;
mod metrics;
mod stages;
mod sweep;
mod train;

pub use daood::{
    audit_daood, collect_daood, fair_compare, Collected, DaoodSets, FairFlag, FairObjective,
    COLLECT_THRESHOLD,
};
pub use experiment::{
    parallel_map, reference_stage, run_all_seeds, run_experiment, run_on, worker_count,
    fair_table, DaoodSettings, DataSource, ExperimentConfig, FairRow, FairTestSets, ModelSpec, ReferenceStage, RunArtifacts,
    RunOutcome, SeedSummary, SweepParam, SweepSettings, Variant, UNIFORM_OPTIMAL_GRID,
};
pub use metrics::{auroc, mean_std, EpochRecord};
pub use stages::{
    batch_posteriors, detection_auroc, draw_augmented, estimate_stage, nda_train, pretrain,
    resmooth_train, Estimate, NegativeObjective, Refit, ResmoothObjective,
};
pub use sweep::{
    ablate, best_value, sweep, two_phase_sweep, with_param, write_report, AblationRow, SweepRow,
    TwoPhaseReport,
};
pub use train::{
    augment_seed, train_stream, BatchObjective, ConstantSmoothing, PlainObjective, StepPlan,
    TrainOutcome,
};
