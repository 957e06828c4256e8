//! One-dimensional two-component Gaussian mixture fitted by EM.

use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::io::{fmt_f64, write_atomic};

/// Lower bound on component standard deviations.
pub const SIGMA_FLOOR: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LossSpace {
    LogLoss,
    NormalizedLoss,
}

impl fmt::Display for LossSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossSpace::LogLoss => "log_loss",
            LossSpace::NormalizedLoss => "normalized_loss",
        })
    }
}

impl FromStr for LossSpace {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "log_loss" => Ok(LossSpace::LogLoss),
            "normalized_loss" => Ok(LossSpace::NormalizedLoss),
            _ => Err(Error::InvalidArgument(format!("unknown loss space `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EmSettings {
    /// Stop once the mean per-value log-likelihood moves less than this.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for EmSettings {
    fn default() -> Self {
        Self {
            tolerance: 1e-6,
            max_iterations: 200,
        }
    }
}

/// Component 0 always has the smaller mean and stands for in-distribution
/// data.
#[derive(Clone, Debug, PartialEq)]
pub struct GmmParams {
    pub mu0: f64,
    pub sigma0: f64,
    pub pi0: f64,
    pub mu1: f64,
    pub sigma1: f64,
    pub pi1: f64,
    pub iterations_used: usize,
    /// Total log-likelihood of the fitted values under the final parameters.
    pub final_log_likelihood: f64,
    pub space: LossSpace,
    /// Standardization applied to raw losses when `space` is normalized.
    pub norm_mean: Option<f64>,
    pub norm_std: Option<f64>,
}

pub fn gaussian_pdf(x: f64, mu: f64, sigma: f64) -> f64 {
    let z = (x - mu) / sigma;
    (-0.5 * z * z).exp() / (sigma * (2.0 * PI).sqrt())
}

#[inline]
fn ln_gaussian(x: f64, mu: f64, sigma: f64) -> f64 {
    let z = (x - mu) / sigma;
    -0.5 * z * z - sigma.ln() - 0.5 * (2.0 * PI).ln()
}

impl GmmParams {
    /// `(ln(pi0 phi0(x)), ln(pi1 phi1(x)))`.
    pub fn component_log_densities(&self, x: f64) -> (f64, f64) {
        (
            self.pi0.ln() + ln_gaussian(x, self.mu0, self.sigma0),
            self.pi1.ln() + ln_gaussian(x, self.mu1, self.sigma1),
        )
    }

    pub fn density(&self, x: f64) -> f64 {
        self.pi0 * gaussian_pdf(x, self.mu0, self.sigma0)
            + self.pi1 * gaussian_pdf(x, self.mu1, self.sigma1)
    }

    fn ordered(mut self) -> Self {
        if self.mu0 > self.mu1 {
            std::mem::swap(&mut self.mu0, &mut self.mu1);
            std::mem::swap(&mut self.sigma0, &mut self.sigma1);
            std::mem::swap(&mut self.pi0, &mut self.pi1);
        }
        self
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in [
            ("mu0", self.mu0),
            ("sigma0", self.sigma0),
            ("pi0", self.pi0),
            ("mu1", self.mu1),
            ("sigma1", self.sigma1),
            ("pi1", self.pi1),
        ] {
            out.push_str(&format!("{k} = {}\n", fmt_f64(v)));
        }
        out.push_str(&format!("space = {}\n", self.space));
        out.push_str(&format!("iterations_used = {}\n", self.iterations_used));
        out.push_str(&format!(
            "final_log_likelihood = {}\n",
            fmt_f64(self.final_log_likelihood)
        ));
        if let (Some(m), Some(s)) = (self.norm_mean, self.norm_std) {
            out.push_str(&format!("norm_mean = {}\nnorm_std = {}\n", fmt_f64(m), fmt_f64(s)));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = std::collections::HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Config {
                line: i + 1,
                key: line.to_string(),
                msg: "expected `key = value`".into(),
            })?;
            kv.insert(k.trim().to_string(), (i + 1, v.trim().to_string()));
        }
        fn field<T: FromStr>(
            kv: &std::collections::HashMap<String, (usize, String)>,
            key: &str,
        ) -> Result<T> {
            let (line, v) = kv.get(key).ok_or_else(|| Error::Config {
                line: 0,
                key: key.into(),
                msg: "missing".into(),
            })?;
            v.parse().map_err(|_| Error::Config {
                line: *line,
                key: key.into(),
                msg: format!("cannot parse `{v}`"),
            })
        }
        let opt = |key: &str| -> Result<Option<f64>> {
            if kv.contains_key(key) {
                field(&kv, key).map(Some)
            } else {
                Ok(None)
            }
        };
        Ok(Self {
            mu0: field(&kv, "mu0")?,
            sigma0: field(&kv, "sigma0")?,
            pi0: field(&kv, "pi0")?,
            mu1: field(&kv, "mu1")?,
            sigma1: field(&kv, "sigma1")?,
            pi1: field(&kv, "pi1")?,
            iterations_used: field(&kv, "iterations_used")?,
            final_log_likelihood: field(&kv, "final_log_likelihood")?,
            space: field(&kv, "space")?,
            norm_mean: opt("norm_mean")?,
            norm_std: opt("norm_std")?,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.render().as_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn std_dev(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Sum of log-likelihoods and ID-component responsibilities.
fn e_step(values: &[f64], p: &GmmParams, resp0: &mut [f64]) -> f64 {
    let mut ll = 0.0;
    for (r, &x) in resp0.iter_mut().zip(values) {
        let (l0, l1) = p.component_log_densities(x);
        let m = l0.max(l1);
        let lse = m + ((l0 - m).exp() + (l1 - m).exp()).ln();
        *r = (l0 - lse).exp();
        ll += lse;
    }
    ll
}

fn m_step(values: &[f64], resp0: &[f64], prev: &GmmParams) -> GmmParams {
    let n = values.len() as f64;
    let (mut n0, mut s0, mut n1, mut s1) = (0.0, 0.0, 0.0, 0.0);
    for (&r, &x) in resp0.iter().zip(values) {
        n0 += r;
        s0 += r * x;
        n1 += 1.0 - r;
        s1 += (1.0 - r) * x;
    }
    let mut next = prev.clone();
    if n0 > 0.0 {
        next.mu0 = s0 / n0;
    }
    if n1 > 0.0 {
        next.mu1 = s1 / n1;
    }
    let (mut v0, mut v1) = (0.0, 0.0);
    for (&r, &x) in resp0.iter().zip(values) {
        v0 += r * (x - next.mu0).powi(2);
        v1 += (1.0 - r) * (x - next.mu1).powi(2);
    }
    if n0 > 0.0 {
        next.sigma0 = (v0 / n0).sqrt().max(SIGMA_FLOOR);
    }
    if n1 > 0.0 {
        next.sigma1 = (v1 / n1).sqrt().max(SIGMA_FLOOR);
    }
    next.pi0 = n0 / n;
    next.pi1 = 1.0 - next.pi0;
    next
}

pub fn fit_gmm_em(values: &[f64], settings: &EmSettings) -> Result<GmmParams> {
    fit_gmm_em_traced(values, settings).map(|(p, _)| p)
}

/// Fits the mixture and also returns the total log-likelihood before the
/// first update and after every EM iteration.
///
/// Initialization: means at the 10th and 90th percentiles, deviations from
/// the halves below and above the median, equal weights.
pub fn fit_gmm_em_traced(values: &[f64], settings: &EmSettings) -> Result<(GmmParams, Vec<f64>)> {
    if values.len() < 10 {
        return Err(Error::TooFewValues {
            needed: 10,
            got: values.len(),
        });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite value in EM input".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted[sorted.len() - 1] - sorted[0] <= 1e-12 {
        return Err(Error::Degenerate);
    }
    let median = percentile(&sorted, 0.5);
    let lower: Vec<f64> = sorted.iter().copied().filter(|&v| v <= median).collect();
    let upper: Vec<f64> = sorted.iter().copied().filter(|&v| v > median).collect();
    let mut params = GmmParams {
        mu0: percentile(&sorted, 0.1),
        sigma0: std_dev(&lower).max(SIGMA_FLOOR),
        pi0: 0.5,
        mu1: percentile(&sorted, 0.9),
        sigma1: std_dev(&upper).max(SIGMA_FLOOR),
        pi1: 0.5,
        iterations_used: 0,
        final_log_likelihood: f64::NEG_INFINITY,
        space: LossSpace::LogLoss,
        norm_mean: None,
        norm_std: None,
    };

    let n = values.len() as f64;
    let mut resp0 = vec![0.0; values.len()];
    let mut ll = e_step(values, &params, &mut resp0);
    let mut trace = vec![ll];
    for iter in 1..=settings.max_iterations {
        params = m_step(values, &resp0, &params);
        let next = e_step(values, &params, &mut resp0);
        trace.push(next);
        params.iterations_used = iter;
        let delta = (next - ll) / n;
        ll = next;
        if delta.abs() < settings.tolerance {
            break;
        }
    }
    params.final_log_likelihood = ll;
    Ok((params.ordered(), trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    use crate::seeding;

    fn mixture_draws(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = seeding::rng(seed);
        let a = Normal::new(-4.0, 0.5).unwrap();
        let b = Normal::new(0.0, 0.7).unwrap();
        (0..n)
            .map(|_| {
                if rng.random::<f64>() < 0.7 {
                    a.sample(&mut rng)
                } else {
                    b.sample(&mut rng)
                }
            })
            .collect()
    }

    #[test]
    fn recovers_known_mixture() {
        let values = mixture_draws(20_000, 17);
        let (p, trace) = fit_gmm_em_traced(&values, &EmSettings::default()).unwrap();
        assert!((p.mu0 + 4.0).abs() <= 0.05, "{p:?}");
        assert!(p.mu1.abs() <= 0.05, "{p:?}");
        assert!((p.pi0 - 0.7).abs() <= 0.03, "{p:?}");
        assert!((p.pi0 + p.pi1 - 1.0).abs() < 1e-9);
        for w in trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "{} -> {}", w[0], w[1]);
        }
        assert!(p.iterations_used < 200);
    }

    #[test]
    fn single_gaussian_density_matches() {
        let mut rng = seeding::rng(4);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let values: Vec<f64> = (0..20_000).map(|_| normal.sample(&mut rng)).collect();
        let p = fit_gmm_em(&values, &EmSettings::default()).unwrap();
        // total variation on a 100-bin grid over [-5, 5]
        let (lo, hi, bins) = (-5.0, 5.0, 100);
        let width = (hi - lo) / bins as f64;
        let tv: f64 = (0..bins)
            .map(|i| {
                let x = lo + (i as f64 + 0.5) * width;
                (p.density(x) - gaussian_pdf(x, 0.0, 1.0)).abs() * width
            })
            .sum::<f64>()
            / 2.0;
        assert!(tv <= 0.05, "tv = {tv}");
        assert!(p.mu0 <= p.mu1);
    }

    #[test]
    fn permutation_invariant() {
        let values = mixture_draws(3_000, 2);
        let mut shuffled = values.clone();
        shuffled.reverse();
        let a = fit_gmm_em(&values, &EmSettings::default()).unwrap();
        let b = fit_gmm_em(&shuffled, &EmSettings::default()).unwrap();
        for (x, y) in [(a.mu0, b.mu0), (a.mu1, b.mu1), (a.sigma0, b.sigma0), (a.pi0, b.pi0)] {
            assert!((x - y).abs() < 1e-8);
        }
    }

    #[test]
    fn errors_and_budget() {
        assert!(matches!(
            fit_gmm_em(&[1.0; 9], &EmSettings::default()),
            Err(Error::TooFewValues { .. })
        ));
        assert!(matches!(
            fit_gmm_em(&[2.5; 40], &EmSettings::default()),
            Err(Error::Degenerate)
        ));
        let values = mixture_draws(500, 9);
        let tight = EmSettings {
            tolerance: 0.0,
            max_iterations: 200,
        };
        let p = fit_gmm_em(&values, &tight).unwrap();
        assert_eq!(p.iterations_used, 200);
        assert!(p.sigma0 >= SIGMA_FLOOR && p.sigma1 >= SIGMA_FLOOR);
    }

    #[test]
    fn text_round_trip() {
        let values = mixture_draws(1_000, 1);
        let mut p = fit_gmm_em(&values, &EmSettings::default()).unwrap();
        assert_eq!(GmmParams::parse(&p.render()).unwrap(), p);
        p.space = LossSpace::NormalizedLoss;
        p.norm_mean = Some(0.3);
        p.norm_std = Some(1.7);
        assert_eq!(GmmParams::parse(&p.render()).unwrap(), p);
        assert!(GmmParams::parse("mu0 = x\n").is_err());
    }
}
