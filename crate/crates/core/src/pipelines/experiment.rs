//! Experiment configuration and end-to-end runs with artifact emission.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Serialize;

use super::metrics::{mean_std, EpochRecord};
use super::stages::{
    detection_auroc, draw_augmented, estimate_stage, nda_train, pretrain, resmooth_train, Refit,
    ResmoothObjective,
};
use super::train::{train_stream, ConstantSmoothing, PlainObjective, TrainOutcome};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::glyphs::{generate_glyphs, GlyphSpec};
use crate::io::write_atomic;
use crate::lossmodel::{write_loss_dump, EmSettings, GmmParams, LossSpace};
use crate::netcore::{evaluate, write_model, Architecture, ModelState, TrainConfig};
use crate::rasters::{AugmentStrategy, LabeledSample};
use crate::seeding;
use crate::smoothing::{AlphaMode, AlphaPolicy};

use super::daood::{collect_daood, fair_compare, FairFlag};

/// Candidate constants for the grid-searched uniform smoothing ablation.
pub const UNIFORM_OPTIMAL_GRID: [f64; 6] = [0.05, 0.1, 0.2, 0.3, 0.4, 0.5];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    ResmoothLog,
    ResmoothNorm,
    BaselinePlain,
    BaselineLsr,
    NdaConstant,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::ResmoothLog,
        Variant::ResmoothNorm,
        Variant::BaselinePlain,
        Variant::BaselineLsr,
        Variant::NdaConstant,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::ResmoothLog => "resmooth_log",
            Variant::ResmoothNorm => "resmooth_norm",
            Variant::BaselinePlain => "baseline_plain",
            Variant::BaselineLsr => "baseline_lsr",
            Variant::NdaConstant => "nda_constant",
        }
    }

    pub fn uses_reference(self) -> bool {
        matches!(self, Variant::ResmoothLog | Variant::ResmoothNorm)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown variant `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum DataSource {
    Glyphs(GlyphSpec),
    Files { train: PathBuf, test: PathBuf },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    /// `mlp1` or `softmax_linear`.
    pub kind: String,
    pub hidden: usize,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            kind: "mlp1".into(),
            hidden: 128,
        }
    }
}

impl ModelSpec {
    pub fn architecture(&self, inputs: usize, classes: usize) -> Result<Architecture> {
        Architecture::parse(&self.kind, inputs, self.hidden, classes)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DaoodSettings {
    /// Target size of each collected set.
    pub target: usize,
    /// Attempt budget; defaults to 1000 draws per target sample.
    pub max_attempts: Option<usize>,
    /// Per-step sample cap for fair comparison.
    pub cap: usize,
    pub flag: FairFlag,
}

impl Default for DaoodSettings {
    fn default() -> Self {
        Self {
            target: 100,
            max_attempts: None,
            cap: 64,
            flag: FairFlag::Mixture,
        }
    }
}

impl DaoodSettings {
    pub fn budget(&self) -> usize {
        self.max_attempts.unwrap_or(1000 * self.target)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SweepParam {
    P,
    Alpha,
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepParam::P => "p",
            SweepParam::Alpha => "alpha",
        })
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "p" => Ok(SweepParam::P),
            "alpha" => Ok(SweepParam::Alpha),
            _ => Err(Error::InvalidArgument(format!("unknown sweep parameter `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSettings {
    pub p_grid: Vec<f64>,
    pub alpha_grid: Vec<f64>,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            p_grid: vec![0.25, 0.5, 0.75, 1.0],
            alpha_grid: vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub model: ModelSpec,
    pub strategy: AugmentStrategy,
    pub variant: Variant,
    pub alpha_max: f64,
    pub alpha_mode: AlphaMode,
    /// Constant for `uniform_optimal`.
    pub alpha_const: Option<f64>,
    pub tau: f64,
    pub pretrain: TrainConfig,
    pub train: TrainConfig,
    pub seeds: Vec<u64>,
    pub refit_per_epoch: bool,
    pub em: EmSettings,
    pub output_dir: PathBuf,
    pub daood: DaoodSettings,
    pub sweep: SweepSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            data: DataSource::Glyphs(GlyphSpec::default()),
            model: ModelSpec::default(),
            strategy: AugmentStrategy::standard(),
            variant: Variant::ResmoothLog,
            alpha_max: 0.4,
            alpha_mode: AlphaMode::Resmooth,
            alpha_const: None,
            tau: 0.5,
            pretrain: TrainConfig::default(),
            train: TrainConfig::default(),
            seeds: vec![0],
            refit_per_epoch: false,
            em: EmSettings::default(),
            output_dir: PathBuf::from("runs"),
            daood: DaoodSettings::default(),
            sweep: SweepSettings::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::InvalidArgument("seed list is empty".into()));
        }
        self.strategy.validate()?;
        self.pretrain.validate()?;
        self.train.validate()?;
        if !(0.0..=1.0).contains(&self.alpha_max) {
            return Err(Error::InvalidArgument(format!(
                "alpha_max = {} outside [0, 1]",
                self.alpha_max
            )));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::InvalidArgument(format!("tau = {} outside (0, 1)", self.tau)));
        }
        if self.variant == Variant::NdaConstant && !self.strategy.kind.is_negative() {
            return Err(Error::InvalidArgument(format!(
                "nda_constant requires jigsaw or rotation, not {}",
                self.strategy.kind
            )));
        }
        Ok(())
    }

    /// Hex digest identifying the experiment; see [`crate::config::identity_text`].
    pub fn hash(&self) -> String {
        crate::config::hash_text(&crate::config::identity_text(self))
    }

    pub fn load_data(&self) -> Result<(Dataset, Dataset)> {
        match &self.data {
            DataSource::Glyphs(spec) => generate_glyphs(spec),
            DataSource::Files { train, test } => Ok((Dataset::read(train)?, Dataset::read(test)?)),
        }
    }

    pub fn pretrain_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            seed: seeding::derive(seed, &[0x97e]),
            ..self.pretrain.clone()
        }
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            seed: seeding::derive(seed, &[0x7a1]),
            ..self.train.clone()
        }
    }

    pub fn run_dir(&self, seed: u64) -> PathBuf {
        self.output_dir.join(self.hash()).join(seed.to_string())
    }
}

/// Files written by one run. Reference-model artifacts exist only for
/// variants that use a reference model.
#[derive(Clone, Debug, PartialEq)]
pub struct RunArtifacts {
    pub dir: PathBuf,
    pub pretrained_model: Option<PathBuf>,
    pub loss_dump: Option<PathBuf>,
    pub gmm: Option<PathBuf>,
    pub final_model: PathBuf,
    pub metrics: PathBuf,
}

pub struct RunOutcome {
    pub seed: u64,
    pub final_test_acc: f64,
    pub epochs: Vec<EpochRecord>,
    pub step_losses: Vec<f64>,
    pub model: ModelState,
    pub reference: Option<ModelState>,
    pub gmm: Option<GmmParams>,
    /// AUROC of the posterior split on the estimation draw, when the
    /// strategy provides ground truth.
    pub detection_auroc: Option<f64>,
    pub artifacts: Option<RunArtifacts>,
}

/// Reference model and fitted mixture for one seed.
pub struct ReferenceStage {
    pub model: ModelState,
    pub gmm: GmmParams,
    pub records: Vec<crate::lossmodel::LossRecord>,
    pub augmented: Vec<LabeledSample>,
    pub detection_auroc: Option<f64>,
}

pub fn reference_stage(
    cfg: &ExperimentConfig,
    train: &Dataset,
    space: LossSpace,
    seed: u64,
) -> Result<ReferenceStage> {
    let arch = cfg.model.architecture(train.input_dim(), train.classes)?;
    let pre = pretrain(&train.samples, None, arch, &cfg.pretrain_config(seed))?;
    let augmented = draw_augmented(&train.samples, &cfg.strategy, seed)?;
    let est = estimate_stage(&pre.model, &train.samples, &augmented, space, &cfg.em)?;
    let detection = if cfg.strategy.kind.is_negative() {
        detection_auroc(&pre.model, &est.gmm, &augmented)?
    } else {
        None
    };
    Ok(ReferenceStage {
        model: pre.model,
        gmm: est.gmm,
        records: est.records,
        augmented,
        detection_auroc: detection,
    })
}

/// Runs the configured variant for one seed, writing artifacts when
/// `write` is set.
pub fn run_experiment(cfg: &ExperimentConfig, seed: u64, write: bool) -> Result<RunOutcome> {
    cfg.validate()?;
    let (train, test) = cfg.load_data()?;
    run_on(cfg, &train, &test, seed, write)
}

pub fn run_on(
    cfg: &ExperimentConfig,
    train: &Dataset,
    test: &Dataset,
    seed: u64,
    write: bool,
) -> Result<RunOutcome> {
    cfg.validate()?;
    let arch = cfg.model.architecture(train.input_dim(), train.classes)?;
    let tcfg = cfg.train_config(seed);
    let data = &train.samples;
    let test_set = Some(test.samples.as_slice());

    let mut stage = None;
    let outcome: TrainOutcome = match cfg.variant {
        Variant::BaselinePlain => train_stream(
            ModelState::init(arch, tcfg.seed),
            data,
            test_set,
            &cfg.strategy,
            &tcfg,
            &mut PlainObjective,
        )?,
        Variant::BaselineLsr => train_stream(
            ModelState::init(arch, tcfg.seed),
            data,
            test_set,
            &cfg.strategy,
            &tcfg,
            &mut ConstantSmoothing(cfg.alpha_max),
        )?,
        Variant::NdaConstant => nda_train(data, test_set, &cfg.strategy, cfg.alpha_max, arch, &tcfg)?,
        Variant::ResmoothLog | Variant::ResmoothNorm => {
            let space = if cfg.variant == Variant::ResmoothLog {
                LossSpace::LogLoss
            } else {
                LossSpace::NormalizedLoss
            };
            let st = reference_stage(cfg, train, space, seed)?;
            let policy = match cfg.alpha_mode {
                AlphaMode::UniformOptimal => {
                    let c = cfg.alpha_const.ok_or(Error::MissingConstant)?;
                    AlphaPolicy::new(AlphaMode::UniformOptimal, cfg.alpha_max).with_constant(c)
                }
                mode => AlphaPolicy::new(mode, cfg.alpha_max),
            };
            let mut objective = ResmoothObjective::new(
                &st.model,
                st.gmm.clone(),
                policy,
                tcfg.seed,
                cfg.strategy.kind.is_negative(),
            );
            if cfg.refit_per_epoch {
                objective = objective.with_refit(Refit {
                    originals: data,
                    strategy: cfg.strategy.clone(),
                    seed,
                    em: cfg.em,
                });
            }
            let out = resmooth_train(data, test_set, &cfg.strategy, arch, &tcfg, &mut objective)?;
            stage = Some(st);
            out
        }
    };

    let final_test_acc = outcome
        .epochs
        .last()
        .and_then(|e| e.test_acc)
        .unwrap_or_else(|| {
            evaluate(&outcome.model, &test.samples)
                .map(|e| e.accuracy)
                .unwrap_or(f64::NAN)
        });
    let mut run = RunOutcome {
        seed,
        final_test_acc,
        epochs: outcome.epochs,
        step_losses: outcome.step_losses,
        model: outcome.model,
        detection_auroc: stage.as_ref().and_then(|s| s.detection_auroc),
        gmm: stage.as_ref().map(|s| s.gmm.clone()),
        reference: None,
        artifacts: None,
    };
    if write {
        run.artifacts = Some(write_run(cfg, &run, stage.as_ref())?);
    }
    run.reference = stage.map(|s| s.model);
    Ok(run)
}

#[derive(Serialize)]
struct MetricsLine<'a> {
    config_hash: &'a str,
    seed: u64,
    variant: &'a str,
    #[serde(flatten)]
    record: &'a EpochRecord,
}

#[derive(Serialize)]
struct FinalLine<'a> {
    config_hash: &'a str,
    seed: u64,
    variant: &'a str,
    record: &'static str,
    final_test_acc: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    detection_auroc: Option<f64>,
}

fn write_run(cfg: &ExperimentConfig, run: &RunOutcome, stage: Option<&ReferenceStage>) -> Result<RunArtifacts> {
    let hash = cfg.hash();
    let root = cfg.output_dir.join(&hash);
    write_atomic(&root.join("config.txt"), crate::config::render(cfg).as_bytes())?;
    let dir = root.join(run.seed.to_string());
    let mut art = RunArtifacts {
        dir: dir.clone(),
        pretrained_model: None,
        loss_dump: None,
        gmm: None,
        final_model: dir.join("final.rsmk"),
        metrics: dir.join("metrics.jsonl"),
    };
    if let Some(st) = stage {
        let p = dir.join("pretrained.rsmk");
        write_model(&p, &st.model)?;
        art.pretrained_model = Some(p);
        let p = dir.join("losses.csv");
        write_loss_dump(&p, &st.records)?;
        art.loss_dump = Some(p);
        let p = dir.join("gmm.txt");
        st.gmm.write(&p)?;
        art.gmm = Some(p);
    }
    write_model(&art.final_model, &run.model)?;
    let variant = cfg.variant.as_str();
    let mut text = String::new();
    for rec in &run.epochs {
        text.push_str(&serde_json::to_string(&MetricsLine {
            config_hash: &hash,
            seed: run.seed,
            variant,
            record: rec,
        })?);
        text.push('\n');
    }
    text.push_str(&serde_json::to_string(&FinalLine {
        config_hash: &hash,
        seed: run.seed,
        variant,
        record: "final",
        final_test_acc: run.final_test_acc,
        detection_auroc: run.detection_auroc,
    })?);
    text.push('\n');
    write_atomic(&art.metrics, text.as_bytes())?;
    Ok(art)
}

/// Worker count from `RESMOOTH_THREADS`, else the available parallelism.
pub fn worker_count() -> usize {
    std::env::var("RESMOOTH_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Applies `f` to every item on up to [`worker_count`] threads, keeping
/// input order in the output.
pub fn parallel_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let workers = worker_count().min(items.len()).max(1);
    if workers == 1 {
        return items.iter().map(&f).collect();
    }
    let next = std::sync::atomic::AtomicUsize::new(0);
    let mut slots: Vec<Option<R>> = (0..items.len()).map(|_| None).collect();
    let results = std::sync::Mutex::new(&mut slots);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                results.lock().expect("result lock")[i] = Some(r);
            });
        }
    });
    slots.into_iter().map(|r| r.expect("every item processed")).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeedSummary {
    pub config_hash: String,
    pub variant: String,
    pub seeds: Vec<u64>,
    pub accuracies: Vec<f64>,
    pub mean_acc: f64,
    pub std_acc: f64,
    pub failures: Vec<String>,
}

/// Runs every configured seed and summarizes final test accuracy.
pub fn run_all_seeds(cfg: &ExperimentConfig, write: bool) -> Result<(Vec<RunOutcome>, SeedSummary)> {
    cfg.validate()?;
    let (train, test) = cfg.load_data()?;
    let results = parallel_map(&cfg.seeds, |&s| run_on(cfg, &train, &test, s, write));
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for (seed, r) in cfg.seeds.iter().zip(results) {
        match r {
            Ok(run) => runs.push(run),
            Err(e) => failures.push(format!("seed {seed}: {e}")),
        }
    }
    let accuracies: Vec<f64> = runs.iter().map(|r| r.final_test_acc).collect();
    let (mean_acc, std_acc) = mean_std(&accuracies);
    let summary = SeedSummary {
        config_hash: cfg.hash(),
        variant: cfg.variant.to_string(),
        seeds: runs.iter().map(|r| r.seed).collect(),
        accuracies,
        mean_acc,
        std_acc,
        failures,
    };
    if write {
        let path = cfg.output_dir.join(cfg.hash()).join("summary.jsonl");
        let mut line = serde_json::to_string(&summary)?;
        line.push('\n');
        write_atomic(&path, line.as_bytes())?;
    }
    Ok((runs, summary))
}


#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FairRow {
    pub flag: String,
    pub clean_acc: f64,
    pub daid_acc: f64,
    pub daood_acc: f64,
    /// Samples consumed per epoch.
    pub consumed: Vec<usize>,
}

/// Held-out augmented ID/OOD test sets drawn from the clean test split.
pub struct FairTestSets {
    pub daid: Vec<LabeledSample>,
    pub daood: Vec<LabeledSample>,
    pub attempts: usize,
}

/// Trains one model per flag under the equal per-step budget and scores
/// each on the clean test set and on held-out ID/OOD augmented test sets.
pub fn fair_table(
    cfg: &ExperimentConfig,
    train: &Dataset,
    test: &Dataset,
    seed: u64,
) -> Result<(Vec<FairRow>, FairTestSets)> {
    cfg.validate()?;
    let st = reference_stage(cfg, train, LossSpace::LogLoss, seed)?;
    let sets = collect_daood(
        &st.model,
        &st.gmm,
        &test.samples,
        &cfg.strategy,
        cfg.daood.target,
        cfg.daood.budget(),
        seeding::derive(seed, &[0xfa17]),
    )?;
    let held = FairTestSets {
        daid: sets.id_samples(),
        daood: sets.ood_samples(),
        attempts: sets.attempts,
    };
    let arch = cfg.model.architecture(train.input_dim(), train.classes)?;
    let tcfg = cfg.train_config(seed);
    let rows = parallel_map(&FairFlag::ALL, |&flag| -> Result<FairRow> {
        let out = fair_compare(
            &st.model,
            &st.gmm,
            &train.samples,
            None,
            &cfg.strategy,
            flag,
            cfg.daood.cap,
            cfg.tau,
            arch,
            &tcfg,
        )?;
        Ok(FairRow {
            flag: flag.to_string(),
            clean_acc: evaluate(&out.model, &test.samples)?.accuracy,
            daid_acc: evaluate(&out.model, &held.daid)?.accuracy,
            daood_acc: evaluate(&out.model, &held.daood)?.accuracy,
            consumed: out.epochs.iter().map(|e| e.samples_consumed).collect(),
        })
    });
    Ok((rows.into_iter().collect::<Result<_>>()?, held))
}
