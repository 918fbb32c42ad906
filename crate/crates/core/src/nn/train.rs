use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::model::{Model, Params};
use super::{NnError, Scalar};
use crate::dataset::Corpus;
use crate::encoding::EncodedFunction;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Drives the per-epoch shuffles.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 32,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), NnError> {
        let ok = self.batch_size > 0
            && self.learning_rate > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(NnError::InvalidConfig(format!("bad training configuration {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Mean cross-entropy over the epoch, measured before each batch update.
    pub mean_loss: f64,
    pub accuracy: f64,
}

/// First and second moment estimates.
struct Adam<F> {
    m: Params<F>,
    v: Params<F>,
    step: i32,
}

impl<F: Scalar> Adam<F> {
    fn update(&mut self, params: &mut Params<F>, grads: &Params<F>, tc: &TrainConfig) {
        self.step += 1;
        let b1 = F::from(tc.beta1).unwrap();
        let b2 = F::from(tc.beta2).unwrap();
        let one = F::one();
        let lr = F::from(tc.learning_rate).unwrap();
        let eps = F::from(tc.epsilon).unwrap();
        let c1 = one - b1.powi(self.step);
        let c2 = one - b2.powi(self.step);
        let step_size = lr * c2.sqrt() / c1;
        let eps_hat = eps * c2.sqrt();
        for (((p, g), m), v) in params
            .tensors_mut()
            .into_iter()
            .zip(grads.tensors())
            .zip(self.m.tensors_mut())
            .zip(self.v.tensors_mut())
        {
            for i in 0..p.len() {
                let gi = g[i];
                m[i] = b1 * m[i] + (one - b1) * gi;
                v[i] = b2 * v[i] + (one - b2) * gi * gi;
                p[i] = p[i] - step_size * m[i] / (v[i].sqrt() + eps_hat);
            }
        }
    }
}

pub fn train<F: Scalar>(
    model: Model<F>,
    corpus: &Corpus,
    tc: &TrainConfig,
) -> Result<(Model<F>, Vec<EpochMetrics>), NnError> {
    train_with_progress(model, corpus, tc, |_| {})
}

/// Mini-batch Adam on mean cross-entropy. Samples are visited in a fresh
/// seeded shuffle each epoch and processed strictly in order, so the result
/// is bit-identical for identical inputs on one platform.
pub fn train_with_progress<F: Scalar>(
    mut model: Model<F>,
    corpus: &Corpus,
    tc: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<(Model<F>, Vec<EpochMetrics>), NnError> {
    tc.validate()?;
    if corpus.is_empty() {
        return Err(NnError::EmptyCorpus);
    }
    if corpus.table_fingerprint != model.table_fingerprint {
        return Err(NnError::TableMismatch {
            model: model.table_fingerprint,
            input: corpus.table_fingerprint,
        });
    }
    let inputs: Vec<EncodedFunction> = (0..corpus.len())
        .map(|i| corpus.encode(i, model.config.input_len))
        .collect();
    let targets: Vec<usize> = corpus.samples.iter().map(|s| s.label.index()).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(tc.seed);
    let mut adam = Adam {
        m: Params::zeros(&model.config)?,
        v: Params::zeros(&model.config)?,
        step: 0,
    };
    let mut grads = Params::zeros(&model.config)?;
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut history = Vec::with_capacity(tc.epochs);

    for epoch in 1..=tc.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0;
        for chunk in order.chunks(tc.batch_size) {
            let batch: Vec<EncodedFunction> = chunk.iter().map(|&i| inputs[i].clone()).collect();
            let batch_targets: Vec<usize> = chunk.iter().map(|&i| targets[i]).collect();
            grads.scale(F::zero());
            let (loss, hits) = model.accumulate_gradients(&batch, &batch_targets, &mut grads)?;
            grads.scale(F::one() / F::from(chunk.len()).unwrap());
            adam.update(&mut model.params, &grads, tc);
            loss_sum += loss.to_f64().unwrap();
            correct += hits;
        }
        let metrics = EpochMetrics {
            epoch,
            mean_loss: loss_sum / inputs.len() as f64,
            accuracy: correct as f64 / inputs.len() as f64,
        };
        log::info!(
            "epoch {epoch}: loss {:.4} accuracy {:.3}",
            metrics.mean_loss,
            metrics.accuracy
        );
        on_epoch(&metrics);
        history.push(metrics);
    }
    Ok((model, history))
}
