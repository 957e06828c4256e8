use super::model::{argmax, Batch, ModelState, Prediction};
use crate::error::{Error, Result};
use crate::rasters::LabeledSample;
use crate::smoothing::plain_ce;

const CHUNK: usize = 256;

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    /// Plain cross-entropy per sample, in input order.
    pub losses: Vec<f64>,
    pub predicted: Vec<usize>,
}

/// Predictions for every sample, in input order.
pub fn predict(model: &ModelState, samples: &[LabeledSample]) -> Result<Vec<Prediction>> {
    let mut out = Vec::with_capacity(samples.len());
    for chunk in samples.chunks(CHUNK) {
        out.extend(model.forward(&Batch::from_samples(chunk)?)?);
    }
    Ok(out)
}

pub fn evaluate(model: &ModelState, samples: &[LabeledSample]) -> Result<Evaluation> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let preds = predict(model, samples)?;
    let mut correct = 0usize;
    let mut losses = Vec::with_capacity(samples.len());
    let mut predicted = Vec::with_capacity(samples.len());
    for (p, s) in preds.iter().zip(samples) {
        let guess = argmax(&p.probabilities);
        if guess == s.label {
            correct += 1;
        }
        predicted.push(guess);
        losses.push(plain_ce(&p.probabilities, s.label));
    }
    Ok(Evaluation {
        accuracy: correct as f64 / samples.len() as f64,
        losses,
        predicted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netcore::Architecture;
    use crate::rasters::Raster;

    fn samples(labels: &[usize]) -> Vec<LabeledSample> {
        labels
            .iter()
            .enumerate()
            .map(|(i, &y)| {
                let mut img = Raster::filled(1, 4, 1, 0);
                img.set(0, y, 0, 255);
                LabeledSample::original(img, y, i as u64)
            })
            .collect()
    }

    #[test]
    fn uniform_predictor_losses() {
        let arch = Architecture::SoftmaxLinear {
            inputs: 4,
            classes: 10,
        };
        let data = samples(&[0, 1, 2, 3]);
        let ev = evaluate(&ModelState::zeros(arch), &data).unwrap();
        for l in &ev.losses {
            assert!((l - std::f64::consts::LN_10).abs() < 1e-12);
        }
        // ties resolve to class 0
        assert_eq!(ev.accuracy, 0.25);
    }

    #[test]
    fn perfect_predictor() {
        let arch = Architecture::SoftmaxLinear {
            inputs: 4,
            classes: 4,
        };
        let mut m = ModelState::zeros(arch);
        for k in 0..4 {
            m.weights[0][k * 4 + k] = 1e4;
        }
        let data = samples(&[0, 1, 2, 3, 2, 1]);
        let ev = evaluate(&m, &data).unwrap();
        assert_eq!(ev.accuracy, 1.0);
        assert!(ev.losses.iter().all(|&l| l == 0.0));
    }

    #[test]
    fn accuracy_matches_recount() {
        let arch = Architecture::SoftmaxLinear {
            inputs: 4,
            classes: 4,
        };
        let m = ModelState::init(arch, 3);
        let data = samples(&[0, 1, 2, 3, 3, 2, 1, 0, 1, 1]);
        let ev = evaluate(&m, &data).unwrap();
        let preds = predict(&m, &data).unwrap();
        let recount = preds
            .iter()
            .zip(&data)
            .filter(|(p, s)| {
                let best = p
                    .probabilities
                    .iter()
                    .cloned()
                    .fold(f64::NEG_INFINITY, f64::max);
                p.probabilities.iter().position(|&v| v == best) == Some(s.label)
            })
            .count();
        assert_eq!(ev.accuracy, recount as f64 / data.len() as f64);
    }

    #[test]
    fn empty_dataset_errors() {
        let arch = Architecture::SoftmaxLinear {
            inputs: 4,
            classes: 4,
        };
        assert!(matches!(
            evaluate(&ModelState::zeros(arch), &[]),
            Err(Error::EmptyDataset)
        ));
    }
}
