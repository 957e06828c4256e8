use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};
use crate::rasters::LabeledSample;
use crate::seeding;
use crate::smoothing;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Architecture {
    SoftmaxLinear { inputs: usize, classes: usize },
    /// One rectified hidden layer.
    Mlp1 {
        inputs: usize,
        hidden: usize,
        classes: usize,
    },
}

impl Architecture {
    pub fn inputs(&self) -> usize {
        match *self {
            Architecture::SoftmaxLinear { inputs, .. } | Architecture::Mlp1 { inputs, .. } => inputs,
        }
    }

    pub fn classes(&self) -> usize {
        match *self {
            Architecture::SoftmaxLinear { classes, .. } | Architecture::Mlp1 { classes, .. } => {
                classes
            }
        }
    }

    pub fn tag(&self) -> u8 {
        match self {
            Architecture::SoftmaxLinear { .. } => 0,
            Architecture::Mlp1 { .. } => 1,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Architecture::SoftmaxLinear { .. } => "softmax_linear",
            Architecture::Mlp1 { .. } => "mlp1",
        }
    }

    /// Parameter shapes in declaration order, with each tensor's fan-in.
    pub fn shapes(&self) -> Vec<(Vec<usize>, usize)> {
        match *self {
            Architecture::SoftmaxLinear { inputs, classes } => {
                vec![(vec![classes, inputs], inputs), (vec![classes], inputs)]
            }
            Architecture::Mlp1 {
                inputs,
                hidden,
                classes,
            } => vec![
                (vec![hidden, inputs], inputs),
                (vec![hidden], inputs),
                (vec![classes, hidden], hidden),
                (vec![classes], hidden),
            ],
        }
    }

    pub fn parse(kind: &str, inputs: usize, hidden: usize, classes: usize) -> Result<Self> {
        match kind {
            "softmax_linear" => Ok(Architecture::SoftmaxLinear { inputs, classes }),
            "mlp1" => Ok(Architecture::Mlp1 {
                inputs,
                hidden,
                classes,
            }),
            _ => Err(Error::InvalidArgument(format!("unknown architecture `{kind}`"))),
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.kind_name())
    }
}

/// Per-tensor gradients, same layout as [`ModelState::weights`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients(pub Vec<Vec<f64>>);

#[derive(Clone, Debug, PartialEq)]
pub struct ModelState {
    pub architecture: Architecture,
    pub weights: Vec<Vec<f64>>,
    pub momentum: Vec<Vec<f64>>,
    pub rng_seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub logits: Vec<f64>,
    pub probabilities: Vec<f64>,
}

impl Prediction {
    /// Index of the largest probability; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        argmax(&self.probabilities)
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Flattened network inputs for a list of samples.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub features: Vec<f64>,
    pub labels: Vec<usize>,
    pub dim: usize,
}

impl Batch {
    pub fn from_samples<'a, I>(samples: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a LabeledSample>,
    {
        let mut features = Vec::new();
        let mut labels = Vec::new();
        let mut dim = None;
        for s in samples {
            let d = s.image.feature_len();
            match dim {
                None => dim = Some(d),
                Some(prev) if prev != d => {
                    return Err(Error::DimensionMismatch {
                        expected: prev,
                        got: d,
                    })
                }
                _ => {}
            }
            s.image.extend_features(&mut features);
            labels.push(s.label);
        }
        Ok(Self {
            features,
            labels,
            dim: dim.unwrap_or(0),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }
}

fn softmax_into(logits: &[f64], out: &mut [f64]) {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &z) in out.iter_mut().zip(logits) {
        *o = (z - m).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; logits.len()];
    softmax_into(logits, &mut out);
    out
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl ModelState {
    /// Uniform init in `[-s, s]` with `s = 1/sqrt(fan_in)`, zero momentum.
    pub fn init(architecture: Architecture, seed: u64) -> Self {
        let mut rng = seeding::rng_for(seed, &[seeding::stream::INIT]);
        let weights = architecture
            .shapes()
            .into_iter()
            .map(|(shape, fan_in)| {
                let s = 1.0 / (fan_in as f64).sqrt();
                let n: usize = shape.iter().product();
                (0..n).map(|_| rng.random_range(-s..=s)).collect()
            })
            .collect();
        Self::with_weights(architecture, weights, seed)
    }

    pub fn zeros(architecture: Architecture) -> Self {
        let weights = architecture
            .shapes()
            .into_iter()
            .map(|(shape, _)| vec![0.0; shape.iter().product()])
            .collect();
        Self::with_weights(architecture, weights, 0)
    }

    pub fn with_weights(architecture: Architecture, weights: Vec<Vec<f64>>, rng_seed: u64) -> Self {
        let momentum = weights.iter().map(|w| vec![0.0; w.len()]).collect();
        Self {
            architecture,
            weights,
            momentum,
            rng_seed,
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.iter().map(Vec::len).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().flatten().all(|v| v.is_finite())
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        if dim != self.architecture.inputs() {
            return Err(Error::DimensionMismatch {
                expected: self.architecture.inputs(),
                got: dim,
            });
        }
        Ok(())
    }

    /// Logits for one input row, also returning the hidden activations.
    fn logits_row(&self, x: &[f64], hidden_out: &mut Vec<f64>, logits: &mut [f64]) {
        let w = &self.weights;
        match self.architecture {
            Architecture::SoftmaxLinear { inputs, classes } => {
                for k in 0..classes {
                    logits[k] = w[1][k] + dot(&w[0][k * inputs..(k + 1) * inputs], x);
                }
            }
            Architecture::Mlp1 {
                inputs,
                hidden,
                classes,
            } => {
                hidden_out.clear();
                hidden_out.extend((0..hidden).map(|h| {
                    (w[1][h] + dot(&w[0][h * inputs..(h + 1) * inputs], x)).max(0.0)
                }));
                for k in 0..classes {
                    logits[k] = w[3][k] + dot(&w[2][k * hidden..(k + 1) * hidden], hidden_out);
                }
            }
        }
    }

    pub fn forward(&self, batch: &Batch) -> Result<Vec<Prediction>> {
        self.check_dim(batch.dim)?;
        let k = self.architecture.classes();
        let mut hidden = Vec::new();
        Ok((0..batch.len())
            .map(|i| {
                let mut logits = vec![0.0; k];
                self.logits_row(batch.row(i), &mut hidden, &mut logits);
                let probabilities = softmax(&logits);
                Prediction {
                    logits,
                    probabilities,
                }
            })
            .collect())
    }

    pub fn forward_one(&self, sample: &LabeledSample) -> Result<Prediction> {
        let batch = Batch::from_samples([sample])?;
        Ok(self.forward(&batch)?.pop().expect("one prediction"))
    }

    /// Loss `sum_i coef_i * H(q'_i, p_i)` with analytic gradients; the
    /// logit gradient of sample i is `coef_i * (p_i - q'_i)`.
    fn weighted_grad(&self, batch: &Batch, alphas: &[f64], coefs: &[f64]) -> (Vec<Vec<f64>>, Gradients) {
        let k = self.architecture.classes();
        let inv_k = 1.0 / k as f64;
        let mut grads: Vec<Vec<f64>> = self.weights.iter().map(|w| vec![0.0; w.len()]).collect();
        let mut probs_all = Vec::with_capacity(batch.len());
        let mut hidden = Vec::new();
        let mut logits = vec![0.0; k];
        let mut dz = vec![0.0; k];
        for i in 0..batch.len() {
            let x = batch.row(i);
            self.logits_row(x, &mut hidden, &mut logits);
            let p = softmax(&logits);
            let (y, a, c) = (batch.labels[i], alphas[i], coefs[i]);
            for j in 0..k {
                let onehot = if j == y { 1.0 } else { 0.0 };
                let target = (1.0 - a) * onehot + a * inv_k;
                dz[j] = c * (p[j] - target);
            }
            match self.architecture {
                Architecture::SoftmaxLinear { inputs, .. } => {
                    for j in 0..k {
                        let row = &mut grads[0][j * inputs..(j + 1) * inputs];
                        row.iter_mut().zip(x).for_each(|(g, &xv)| *g += dz[j] * xv);
                        grads[1][j] += dz[j];
                    }
                }
                Architecture::Mlp1 { inputs, hidden: hd, .. } => {
                    let mut dh = vec![0.0; hd];
                    for j in 0..k {
                        let w2 = &self.weights[2][j * hd..(j + 1) * hd];
                        let g2 = &mut grads[2][j * hd..(j + 1) * hd];
                        for h in 0..hd {
                            g2[h] += dz[j] * hidden[h];
                            dh[h] += dz[j] * w2[h];
                        }
                        grads[3][j] += dz[j];
                    }
                    for h in 0..hd {
                        if hidden[h] <= 0.0 {
                            continue;
                        }
                        let d = dh[h];
                        let row = &mut grads[0][h * inputs..(h + 1) * inputs];
                        row.iter_mut().zip(x).for_each(|(g, &xv)| *g += d * xv);
                        grads[1][h] += d;
                    }
                }
            }
            probs_all.push(p);
        }
        (probs_all, Gradients(grads))
    }
}

/// Mean per-sample smoothed cross-entropy and its gradient.
pub fn loss_and_grad(model: &ModelState, batch: &Batch, alphas: &[f64]) -> Result<(f64, Gradients)> {
    model.check_dim(batch.dim)?;
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if alphas.len() != batch.len() {
        return Err(Error::InvalidArgument("one strength per sample required".into()));
    }
    let coef = 1.0 / batch.len() as f64;
    let (probs, grads) = model.weighted_grad(batch, alphas, &vec![coef; batch.len()]);
    let loss = smoothing::loss_div(&probs, &batch.labels, alphas)?;
    if !loss.is_finite() {
        return Err(Error::NonFiniteLoss);
    }
    Ok((loss, grads))
}

/// Group-normalized objective: plain cross-entropy averaged over samples with
/// `ood[i] == false`, plus constant-strength smoothed cross-entropy averaged
/// over the rest.
pub fn loss_and_grad_neg(
    model: &ModelState,
    batch: &Batch,
    ood: &[bool],
    alpha: f64,
) -> Result<(f64, Gradients)> {
    model.check_dim(batch.dim)?;
    if ood.len() != batch.len() {
        return Err(Error::InvalidArgument("one group flag per sample required".into()));
    }
    let n_ood = ood.iter().filter(|&&o| o).count();
    let n_id = batch.len() - n_ood;
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let alphas: Vec<f64> = ood.iter().map(|&o| if o { alpha } else { 0.0 }).collect();
    let coefs: Vec<f64> = ood
        .iter()
        .map(|&o| 1.0 / if o { n_ood } else { n_id } as f64)
        .collect();
    let (probs, grads) = model.weighted_grad(batch, &alphas, &coefs);
    let (mut id_p, mut id_y, mut ood_p, mut ood_y) = (vec![], vec![], vec![], vec![]);
    for ((p, &y), &o) in probs.into_iter().zip(&batch.labels).zip(ood) {
        if o {
            ood_p.push(p);
            ood_y.push(y);
        } else {
            id_p.push(p);
            id_y.push(y);
        }
    }
    let loss = smoothing::loss_neg(&id_p, &id_y, &ood_p, &ood_y, alpha)?;
    if !loss.is_finite() {
        return Err(Error::NonFiniteLoss);
    }
    Ok((loss, grads))
}
