//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any criterion fails.

use std::time::{Duration, Instant};

use rand::Rng;
use rand_distr::{Distribution, Normal};

use resmooth::config;
use resmooth::glyphs::GlyphSpec;
use resmooth::lossmodel::{fit_gmm_em_traced, EmSettings, GmmParams, LossSpace};
use resmooth::netcore::{encode_model, loss_and_grad, Architecture, Batch, ModelState};
use resmooth::pipelines::{
    audit_daood, collect_daood, fair_table, reference_stage, run_all_seeds, run_on, DataSource,
    ExperimentConfig, Variant,
};
use resmooth::rasters::{AugmentStrategy, LabeledSample, Raster, StrategyKind};
use resmooth::seeding;
use resmooth::smoothing::{plain_ce, smooth_label, uniform_ce, AlphaMode, PROB_FLOOR};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn check(id: usize, name: &str, budget: Option<Duration>, f: impl FnOnce() -> Verdict) -> bool {
    let start = Instant::now();
    let v = f();
    let took = start.elapsed();
    let in_time = budget.is_none_or(|b| took <= b);
    let pass = v.pass && in_time;
    let limit = budget.map_or(String::new(), |b| format!(" / limit {:.0?}", b));
    println!(
        "[{}] {id:>2}. {name}: {} ({:.2?}{limit})",
        if pass { "PASS" } else { "FAIL" },
        v.detail,
        took
    );
    pass
}

/// Independent cross-entropy of an explicit smoothed target.
fn oracle_smoothed_ce(p: &[f64], y: usize, alpha: f64) -> f64 {
    let k = p.len() as f64;
    p.iter()
        .enumerate()
        .map(|(i, &pi)| {
            let q = if i == y { 1.0 - alpha + alpha / k } else { alpha / k };
            -q * pi.max(PROB_FLOOR).ln()
        })
        .sum()
}

fn random_simplex<R: Rng>(rng: &mut R, k: usize) -> Vec<f64> {
    let z: Vec<f64> = (0..k).map(|_| rng.random_range(-6.0..6.0)).collect();
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

fn c1_smoothing_identity() -> Verdict {
    let mut rng = seeding::rng(101);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let k = rng.random_range(2..=20);
        let p = random_simplex(&mut rng, k);
        let y = rng.random_range(0..k);
        let alpha = rng.random::<f64>();
        let target = smooth_label(y, alpha, k);
        let direct: f64 = target
            .distribution
            .iter()
            .zip(&p)
            .map(|(q, pi)| -q * pi.max(PROB_FLOOR).ln())
            .sum();
        let split = (1.0 - alpha) * plain_ce(&p, y) + alpha * uniform_ce(&p);
        worst = worst.max((direct - split).abs());
        worst = worst.max((oracle_smoothed_ce(&p, y, alpha) - split).abs());
    }
    verdict(worst <= 1e-10, format!("max |diff| = {worst:.2e} (tol 1e-10) over 10000 triples"))
}

fn random_batch<R: Rng>(rng: &mut R, n: usize, side: usize, classes: usize) -> Batch {
    let samples: Vec<LabeledSample> = (0..n)
        .map(|i| {
            let px = (0..side * side).map(|_| rng.random()).collect();
            LabeledSample::original(
                Raster::new(side, side, 1, px).unwrap(),
                rng.random_range(0..classes),
                i as u64,
            )
        })
        .collect();
    Batch::from_samples(&samples).unwrap()
}

fn c2_gradients() -> Verdict {
    let mut rng = seeding::rng(202);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for inst in 0..100 {
        let side = 3;
        let classes = rng.random_range(2..=5);
        let inputs = side * side;
        let arch = if inst % 2 == 0 {
            Architecture::SoftmaxLinear { inputs, classes }
        } else {
            Architecture::Mlp1 {
                inputs,
                hidden: 5,
                classes,
            }
        };
        let model = ModelState::init(arch, rng.random());
        let n = rng.random_range(1..=6);
        let batch = random_batch(&mut rng, n, side, classes);
        let alphas: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let (_, g) = loss_and_grad(&model, &batch, &alphas).unwrap();
        for t in 0..model.weights.len() {
            for j in 0..model.weights[t].len() {
                let mut plus = model.clone();
                plus.weights[t][j] += h;
                let mut minus = model.clone();
                minus.weights[t][j] -= h;
                let fd = (loss_and_grad(&plus, &batch, &alphas).unwrap().0
                    - loss_and_grad(&minus, &batch, &alphas).unwrap().0)
                    / (2.0 * h);
                let an = g.0[t][j];
                let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-3);
                worst = worst.max(rel);
            }
        }
    }
    verdict(
        worst <= 1e-5,
        format!("max relative error = {worst:.2e} (tol 1e-5, floor 1e-3) over 100 instances"),
    )
}

fn c3_em_recovery() -> Verdict {
    let mut rng = seeding::rng(303);
    let (a, b) = (Normal::new(-4.0, 0.5).unwrap(), Normal::new(0.0, 0.7).unwrap());
    let values: Vec<f64> = (0..20_000)
        .map(|_| {
            if rng.random::<f64>() < 0.7 {
                a.sample(&mut rng)
            } else {
                b.sample(&mut rng)
            }
        })
        .collect();
    let (p, trace) = fit_gmm_em_traced(&values, &EmSettings::default()).unwrap();
    let dmu = (p.mu0 + 4.0).abs().max(p.mu1.abs());
    let dpi = (p.pi0 - 0.7).abs().max((p.pi1 - 0.3).abs());
    let worst_drop = trace
        .windows(2)
        .map(|w| w[0] - w[1])
        .fold(f64::NEG_INFINITY, f64::max);
    let monotone = worst_drop <= 1e-9;
    verdict(
        dmu <= 0.05 && dpi <= 0.03 && monotone,
        format!(
            "|dmu| = {dmu:.4} (tol 0.05), |dpi| = {dpi:.4} (tol 0.03), largest LL drop = {worst_drop:.2e} (slack 1e-9), {} iterations",
            p.iterations_used
        ),
    )
}

fn gmm(mu0: f64, s0: f64, pi0: f64, mu1: f64, s1: f64) -> GmmParams {
    GmmParams {
        mu0,
        sigma0: s0,
        pi0,
        mu1,
        sigma1: s1,
        pi1: 1.0 - pi0,
        iterations_used: 0,
        final_log_likelihood: 0.0,
        space: LossSpace::LogLoss,
        norm_mean: None,
        norm_std: None,
    }
}

fn c4_posterior() -> Verdict {
    let mut rng = seeding::rng(404);
    let mut in_range = true;
    let mut monotone = true;
    let mut mid_err: f64 = 0.0;
    for _ in 0..200 {
        let mu0 = rng.random_range(-8.0..0.0);
        let mu1 = mu0 + rng.random_range(0.1..6.0);
        let (s0, s1) = (rng.random_range(0.05..3.0), rng.random_range(0.05..3.0));
        let pi0 = rng.random_range(0.01..0.99);
        let g = gmm(mu0, s0, pi0, mu1, s1);
        for i in 0..400 {
            let x = -15.0 + 20.0 * i as f64 / 399.0;
            let w = g.posterior_of_value(x);
            in_range &= (0.0..=1.0).contains(&w);
        }
        // equal variances: never increasing, and strictly decreasing away
        // from the tails where f64 cannot resolve the step
        let eq = gmm(mu0, s0, pi0, mu1, s0);
        let xs: Vec<f64> = (0..200).map(|i| mu0 - 1.0 + (mu1 - mu0 + 2.0) * i as f64 / 199.0).collect();
        let ws: Vec<f64> = xs.iter().map(|x| eq.posterior_of_value(*x)).collect();
        let resolvable = |w: f64| w.min(1.0 - w) >= 1e-9;
        for w in ws.windows(2) {
            monotone &= w[1] <= w[0];
            if resolvable(w[0]) && resolvable(w[1]) {
                monotone &= w[1] < w[0];
            }
        }
        let sym = gmm(mu0, s0, 0.5, mu1, s0);
        let mid = (mu0 + mu1) / 2.0;
        mid_err = mid_err.max((sym.posterior_of_value(mid) - 0.5).abs());
    }
    verdict(
        in_range && monotone && mid_err <= 1e-12,
        format!("w in [0,1]: {in_range}, strictly decreasing: {monotone}, midpoint |w - 0.5| = {mid_err:.2e} (tol 1e-12)"),
    )
}

fn detection_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.pretrain.epochs = 60;
    cfg.strategy = AugmentStrategy::of(StrategyKind::Jigsaw, 0.3);
    cfg.strategy.grid_k = 4;
    cfg
}

fn c5_detection() -> Verdict {
    let cfg = detection_config();
    let (train, _) = cfg.load_data().unwrap();
    let mut aucs = Vec::new();
    for seed in 0..3 {
        let st = reference_stage(&cfg, &train, LossSpace::LogLoss, seed).unwrap();
        aucs.push(st.detection_auroc.unwrap_or(f64::NAN));
    }
    let min = aucs.iter().copied().fold(f64::INFINITY, f64::min);
    verdict(
        min >= 0.95,
        format!("AUROC per seed {aucs:.4?}, min {min:.4} (need >= 0.95)"),
    )
}

fn small_config(variant: Variant) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        data: DataSource::Glyphs(GlyphSpec {
            classes: 5,
            train_per_class: 40,
            test_per_class: 20,
            ..GlyphSpec::default()
        }),
        variant,
        strategy: AugmentStrategy::of(StrategyKind::RandAugment, 0.5),
        ..ExperimentConfig::default()
    };
    cfg.model.hidden = 32;
    cfg.pretrain.epochs = 5;
    cfg.train.epochs = 5;
    cfg
}

fn c6_reductions() -> Verdict {
    let same = |a: &ExperimentConfig, b: &ExperimentConfig, seed| {
        let (train, test) = a.load_data().unwrap();
        let ra = run_on(a, &train, &test, seed, false).unwrap();
        let rb = run_on(b, &train, &test, seed, false).unwrap();
        encode_model(&ra.model) == encode_model(&rb.model) && ra.step_losses == rb.step_losses
    };
    let mut zero = small_config(Variant::ResmoothLog);
    zero.alpha_max = 0.0;
    let plain = small_config(Variant::BaselinePlain);
    let mut given = small_config(Variant::ResmoothLog);
    given.alpha_mode = AlphaMode::UniformGiven;
    let lsr = small_config(Variant::BaselineLsr);
    let (mut a, mut b) = (true, true);
    for seed in 0..3 {
        a &= same(&zero, &plain, seed);
        b &= same(&given, &lsr, seed);
    }
    verdict(
        a && b,
        format!("alpha_max=0 == plain: {a}; uniform_given == lsr: {b} (bitwise, 3 seeds)"),
    )
}

fn randaugment_config() -> ExperimentConfig {
    config::parse(include_str!("configs/randaugment.conf")).unwrap()
}

fn c7_randaugment() -> Verdict {
    let base = randaugment_config();
    let mut means = Vec::new();
    for (variant, alpha) in [
        (Variant::ResmoothLog, base.alpha_max),
        (Variant::BaselineLsr, base.alpha_const.unwrap_or(base.alpha_max)),
        (Variant::BaselinePlain, 0.0),
    ] {
        let mut cfg = base.clone();
        cfg.variant = variant;
        cfg.alpha_max = alpha;
        cfg.alpha_const = None;
        let (_, s) = run_all_seeds(&cfg, false).unwrap();
        means.push(s.mean_acc);
    }
    let (rs, lsr, plain) = (means[0], means[1], means[2]);
    let gap = 100.0 * (rs - lsr);
    verdict(
        rs > lsr && lsr > plain && gap >= 0.5,
        format!(
            "mean acc resmooth_log {:.2}%, baseline_lsr {:.2}%, baseline_plain {:.2}%; rs - lsr = {gap:.2} pts (need rs > lsr > plain, gap >= 0.5)",
            100.0 * rs,
            100.0 * lsr,
            100.0 * plain
        ),
    )
}

fn c8_rotation_nda() -> Verdict {
    let base = config::parse(include_str!("configs/rotation_nda.conf")).unwrap();
    let mut plain = base.clone();
    plain.variant = Variant::BaselinePlain;
    let mut nda = base.clone();
    nda.variant = Variant::NdaConstant;
    let (_, p) = run_all_seeds(&plain, false).unwrap();
    let (_, n) = run_all_seeds(&nda, false).unwrap();
    verdict(
        n.mean_acc > p.mean_acc,
        format!(
            "mean acc nda_constant {:.2}% vs plain rotation {:.2}% over {} seeds",
            100.0 * n.mean_acc,
            100.0 * p.mean_acc,
            n.seeds.len()
        ),
    )
}

fn c9_fair_compare() -> Verdict {
    let cfg = config::parse(include_str!("configs/fair_compare.conf")).unwrap();
    let (train, test) = cfg.load_data().unwrap();
    let mut sums = [[0.0; 3]; 3];
    let mut equal_budgets = true;
    for &seed in &cfg.seeds {
        let (rows, _) = fair_table(&cfg, &train, &test, seed).unwrap();
        equal_budgets &= rows.iter().all(|r| r.consumed == rows[0].consumed);
        for (i, r) in rows.iter().enumerate() {
            sums[i][0] += r.clean_acc;
            sums[i][1] += r.daid_acc;
            sums[i][2] += r.daood_acc;
        }
    }
    // rows come in FairFlag::ALL order: daid, daood, mixture
    let n = cfg.seeds.len() as f64;
    let m = |i: usize, j: usize| 100.0 * sums[i][j] / n;
    let daid_tops_daid = m(0, 1) > m(1, 1) && m(0, 1) >= m(2, 1);
    let mix_tops_clean = m(2, 0) >= m(0, 0) && m(2, 0) >= m(1, 0);
    verdict(
        daid_tops_daid && mix_tops_clean && equal_budgets,
        format!(
            "DAID test: daid {:.2} / daood {:.2} / mix {:.2}; clean test: daid {:.2} / daood {:.2} / mix {:.2}; equal budgets: {equal_budgets}",
            m(0, 1), m(1, 1), m(2, 1), m(0, 0), m(1, 0), m(2, 0)
        ),
    )
}

fn c10_audit() -> Verdict {
    let cfg = ExperimentConfig {
        strategy: AugmentStrategy::of(StrategyKind::RandAugment, 1.0),
        ..ExperimentConfig::default()
    };
    let (train, _) = cfg.load_data().unwrap();
    let target = 100;
    let st = reference_stage(&cfg, &train, LossSpace::LogLoss, 0).unwrap();
    let sets = collect_daood(&st.model, &st.gmm, &train.samples, &cfg.strategy, target, 1000 * target, 7).unwrap();
    let violations = audit_daood(&st.model, &st.gmm, &train.samples, &sets).unwrap();
    let sized = sets.id.len() == target && sets.ood.len() == target;
    verdict(
        violations == 0 && sized,
        format!(
            "{violations} violations among {} OOD + {} ID entries (target {target}), {} attempts",
            sets.ood.len(),
            sets.id.len(),
            sets.attempts
        ),
    )
}

fn tree_bytes(root: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().display().to_string();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn c11_determinism() -> Verdict {
    // both runs write to the same path so config.txt's output_dir agrees
    let tmp = tempfile::tempdir().unwrap();
    let (out, first) = (tmp.path().join("runs"), tmp.path().join("first"));
    let mut cfg = small_config(Variant::ResmoothLog);
    cfg.seeds = vec![0, 1];
    cfg.output_dir = out.clone();
    run_all_seeds(&cfg, true).unwrap();
    std::fs::rename(&out, &first).unwrap();
    run_all_seeds(&cfg, true).unwrap();
    let (a, b) = (tree_bytes(&first), tree_bytes(&out));
    let identical = a == b && !a.is_empty();
    // every metrics line carries the hash of the stored config
    let root = first.join(cfg.hash());
    let stored = config::load(&root.join("config.txt")).unwrap().hash();
    let mut hashes_ok = stored == cfg.hash();
    for (name, bytes) in &a {
        if name.ends_with("metrics.jsonl") {
            for line in String::from_utf8_lossy(bytes).lines() {
                let v: serde_json::Value = serde_json::from_str(line).unwrap();
                hashes_ok &= v["config_hash"] == stored.as_str();
            }
        }
    }
    verdict(
        identical && hashes_ok,
        format!("{} files byte-identical: {identical}; embedded config hash matches re-hash: {hashes_ok}", a.len()),
    )
}

fn main() {
    let mins = |m: u64| Some(Duration::from_secs(60 * m));
    let secs = |s: u64| Some(Duration::from_secs(s));
    let results = [
        check(1, "smoothing identity", secs(1), c1_smoothing_identity),
        check(2, "gradient correctness", secs(10), c2_gradients),
        check(3, "EM recovery", secs(1), c3_em_recovery),
        check(4, "posterior properties", None, c4_posterior),
        check(5, "detection quality (30% jigsaw)", mins(2), c5_detection),
        check(6, "reduction equivalences", None, c6_reductions),
        check(7, "smoothing trend (RandAugment)", mins(15), c7_randaugment),
        check(8, "negative rotation trend", mins(10), c8_rotation_nda),
        check(9, "fair comparison ordering", None, c9_fair_compare),
        check(10, "collection audit", None, c10_audit),
        check(11, "determinism", None, c11_determinism),
    ];
    let failed = results.iter().filter(|p| !**p).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
