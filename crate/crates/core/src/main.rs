use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use resmooth::config;
use resmooth::dataset::Dataset;
use resmooth::lossmodel::{write_loss_dump, GmmParams, LossSpace};
use resmooth::netcore::{evaluate, read_model, write_model};
use resmooth::pipelines::{
    ablate, audit_daood, collect_daood, draw_augmented, estimate_stage, fair_table, pretrain,
    run_all_seeds, run_on, sweep, two_phase_sweep, write_report, ExperimentConfig, SweepParam,
    Variant,
};
use resmooth::plot::plot_losses;
use resmooth::{Error, Result};

#[derive(Parser)]
#[command(name = "resmooth", version, about = "Per-sample label smoothing for augmented data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment config file.
    #[arg(long)]
    config: PathBuf,
    /// Run a single seed instead of the config's seed list.
    #[arg(long)]
    seed: Option<u64>,
    /// Output root, overriding the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Render the glyph dataset to train/test files.
    GenData(Common),
    /// Train the reference model on standard-augmented data.
    Pretrain(Common),
    /// Fit the loss mixture with the saved reference model.
    FitGmm(Common),
    /// Train the configured variant.
    Train(Common),
    /// Collect augmented ID and OOD sets by rejection sampling.
    CollectDaood(Common),
    /// Equal-budget training on ID, OOD and mixed augmented samples.
    FairCompare(Common),
    /// Two-phase p then alpha sweep, or a single sweep with --param.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        param: Option<SweepParam>,
    },
    /// Smoothing-strength ablations.
    Ablate(Common),
    /// Histogram of a loss dump, with mixture overlay when available.
    Plot {
        #[command(flatten)]
        common: Common,
        /// Loss dump; defaults to the run's losses.csv.
        #[arg(long)]
        dump: Option<PathBuf>,
        /// Mixture file; defaults to the run's gmm.txt when it exists.
        #[arg(long)]
        gmm: Option<PathBuf>,
        /// Plot the histogram only.
        #[arg(long)]
        no_gmm: bool,
    },
}

struct Ctx {
    cfg: ExperimentConfig,
    seed: u64,
}

impl Ctx {
    fn new(common: &Common) -> Result<Self> {
        let mut cfg = config::load(&common.config)?;
        if let Some(out) = &common.out {
            cfg.output_dir = out.clone();
        }
        if let Some(seed) = common.seed {
            cfg.seeds = vec![seed];
        }
        cfg.validate()?;
        let seed = cfg.seeds[0];
        Ok(Self { cfg, seed })
    }

    fn run_dir(&self) -> PathBuf {
        self.cfg.run_dir(self.seed)
    }

    fn space(&self) -> LossSpace {
        if self.cfg.variant == Variant::ResmoothNorm {
            LossSpace::NormalizedLoss
        } else {
            LossSpace::LogLoss
        }
    }

    fn exp_dir(&self) -> PathBuf {
        self.cfg.output_dir.join(self.cfg.hash())
    }
}

fn read_existing(path: &Path, hint: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "{} not found; run `{hint}` first",
            path.display()
        )))
    }
}

fn run(cli: Cli) -> Result<String> {
    match cli.command {
        Command::GenData(c) => {
            let ctx = Ctx::new(&c)?;
            let (train, test) = ctx.cfg.load_data()?;
            let dir = ctx.exp_dir().join("data");
            train.write(&dir.join("train.rsds"))?;
            test.write(&dir.join("test.rsds"))?;
            Ok(format!(
                "gen-data: {} train, {} test samples, {} classes -> {}",
                train.samples.len(),
                test.samples.len(),
                train.classes,
                dir.display()
            ))
        }
        Command::Pretrain(c) => {
            let ctx = Ctx::new(&c)?;
            let (train, test) = ctx.cfg.load_data()?;
            let arch = ctx.cfg.model.architecture(train.input_dim(), train.classes)?;
            let out = pretrain(&train.samples, None, arch, &ctx.cfg.pretrain_config(ctx.seed))?;
            let acc = evaluate(&out.model, &test.samples)?.accuracy;
            let path = ctx.run_dir().join("pretrained.rsmk");
            write_model(&path, &out.model)?;
            Ok(format!("pretrain: seed {} test_acc {acc:.4} -> {}", ctx.seed, path.display()))
        }
        Command::FitGmm(c) => {
            let ctx = Ctx::new(&c)?;
            let dir = ctx.run_dir();
            let model_path = dir.join("pretrained.rsmk");
            read_existing(&model_path, "pretrain")?;
            let reference = read_model(&model_path)?;
            let (train, _) = ctx.cfg.load_data()?;
            let augmented = draw_augmented(&train.samples, &ctx.cfg.strategy, ctx.seed)?;
            let est = estimate_stage(&reference, &train.samples, &augmented, ctx.space(), &ctx.cfg.em)?;
            write_loss_dump(&dir.join("losses.csv"), &est.records)?;
            est.gmm.write(&dir.join("gmm.txt"))?;
            let g = &est.gmm;
            Ok(format!(
                "fit-gmm: mu0 {:.4} sigma0 {:.4} pi0 {:.4} mu1 {:.4} sigma1 {:.4} pi1 {:.4} after {} iterations",
                g.mu0, g.sigma0, g.pi0, g.mu1, g.sigma1, g.pi1, g.iterations_used
            ))
        }
        Command::Train(c) => {
            let ctx = Ctx::new(&c)?;
            if c.seed.is_some() {
                let (train, test) = ctx.cfg.load_data()?;
                let run = run_on(&ctx.cfg, &train, &test, ctx.seed, true)?;
                Ok(format!(
                    "train: {} seed {} test_acc {:.4} config {}",
                    ctx.cfg.variant,
                    ctx.seed,
                    run.final_test_acc,
                    ctx.cfg.hash()
                ))
            } else {
                let (_, s) = run_all_seeds(&ctx.cfg, true)?;
                if !s.failures.is_empty() {
                    return Err(Error::InvalidArgument(s.failures.join("; ")));
                }
                Ok(format!(
                    "train: {} over {} seeds test_acc {:.4} ± {:.4} config {}",
                    s.variant,
                    s.seeds.len(),
                    s.mean_acc,
                    s.std_acc,
                    s.config_hash
                ))
            }
        }
        Command::CollectDaood(c) => {
            let ctx = Ctx::new(&c)?;
            let dir = ctx.run_dir();
            let (model_path, gmm_path) = (dir.join("pretrained.rsmk"), dir.join("gmm.txt"));
            read_existing(&model_path, "pretrain")?;
            read_existing(&gmm_path, "fit-gmm")?;
            let reference = read_model(&model_path)?;
            let gmm = GmmParams::read(&gmm_path)?;
            let (train, _) = ctx.cfg.load_data()?;
            let d = &ctx.cfg.daood;
            let sets = collect_daood(
                &reference,
                &gmm,
                &train.samples,
                &ctx.cfg.strategy,
                d.target,
                d.budget(),
                ctx.seed,
            )?;
            let violations = audit_daood(&reference, &gmm, &train.samples, &sets)?;
            let write = |name: &str, samples: Vec<_>| {
                Dataset::new(train.height, train.width, train.channels, train.classes, samples)
                    .and_then(|ds| ds.write(&dir.join(name)))
            };
            write("daid.rsds", sets.id_samples())?;
            write("daood.rsds", sets.ood_samples())?;
            Ok(format!(
                "collect-daood: {} ID, {} OOD after {} attempts, {violations} audit violations",
                sets.id.len(),
                sets.ood.len(),
                sets.attempts
            ))
        }
        Command::FairCompare(c) => {
            let ctx = Ctx::new(&c)?;
            let (train, test) = ctx.cfg.load_data()?;
            let (rows, _) = fair_table(&ctx.cfg, &train, &test, ctx.seed)?;
            write_report(&ctx.run_dir().join("fair.jsonl"), &rows)?;
            let cells: Vec<String> = rows
                .iter()
                .map(|r| format!("{} clean {:.4} daid {:.4} daood {:.4}", r.flag, r.clean_acc, r.daid_acc, r.daood_acc))
                .collect();
            Ok(format!("fair-compare: {}", cells.join(" | ")))
        }
        Command::Sweep { common, param } => {
            let ctx = Ctx::new(&common)?;
            let path = ctx.exp_dir().join("sweep.jsonl");
            match param {
                Some(p) => {
                    let grid = match p {
                        SweepParam::P => &ctx.cfg.sweep.p_grid,
                        SweepParam::Alpha => &ctx.cfg.sweep.alpha_grid,
                    };
                    let rows = sweep(&ctx.cfg, p, grid, true)?;
                    write_report(&path, &rows)?;
                    let best = resmooth::pipelines::best_value(&rows);
                    Ok(format!(
                        "sweep: {} grid points over {p}, best {}",
                        rows.len(),
                        best.map_or("none".into(), |b| b.to_string())
                    ))
                }
                None => {
                    let report = two_phase_sweep(&ctx.cfg, true)?;
                    let mut rows = report.p_rows.clone();
                    rows.extend(report.alpha_rows.iter().cloned());
                    write_report(&path, &rows)?;
                    Ok(format!(
                        "sweep: best p {} then best alpha {}",
                        report.best_p, report.best_alpha
                    ))
                }
            }
        }
        Command::Ablate(c) => {
            let ctx = Ctx::new(&c)?;
            let rows = ablate(&ctx.cfg, true)?;
            write_report(&ctx.exp_dir().join("ablation.jsonl"), &rows)?;
            let cells: Vec<String> = rows
                .iter()
                .map(|r| format!("{} {:.4}", r.name, r.mean_acc))
                .collect();
            Ok(format!("ablate: {}", cells.join(", ")))
        }
        Command::Plot {
            common,
            dump,
            gmm,
            no_gmm,
        } => {
            let ctx = Ctx::new(&common)?;
            let dir = ctx.run_dir();
            let dump = dump.unwrap_or_else(|| dir.join("losses.csv"));
            read_existing(&dump, "fit-gmm")?;
            let gmm = match (no_gmm, gmm) {
                (true, _) => None,
                (false, Some(g)) => Some(g),
                (false, None) => Some(dir.join("gmm.txt")).filter(|p| p.exists()),
            };
            let out = plot_losses(&dump, gmm.as_deref(), &dir.join("loss_hist.svg"))?;
            Ok(format!(
                "plot: {} records in {} bins -> {}",
                out.histogram.counts.iter().sum::<usize>(),
                out.histogram.counts.len(),
                out.svg.display()
            ))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
