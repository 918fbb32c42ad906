use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layers::{relu_backward, relu_in_place, softmax, Conv1d, Dense, Matrix, MaxPool, Pooled};
use super::{NnError, Scalar};
use crate::dataset::Label;
use crate::encoding::{EncodedFunction, MAX_TOKENS, TOKEN_BITS};

pub const NUM_CLASSES: usize = Label::COUNT;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelConfig {
    pub input_len: usize,
    /// Bits per token; the first kernel spans all of them.
    pub input_width: usize,
    pub conv1_filters: usize,
    pub conv1_width: usize,
    pub pool_window: usize,
    pub conv2_filters: usize,
    pub conv2_width: usize,
    pub dense1_units: usize,
    pub classes: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            input_len: MAX_TOKENS,
            input_width: TOKEN_BITS,
            conv1_filters: 64,
            conv1_width: 5,
            pool_window: 2,
            conv2_filters: 128,
            conv2_width: 5,
            dense1_units: 64,
            classes: NUM_CLASSES,
        }
    }
}

/// Lengths along the token axis after each stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShapeChain {
    pub input: usize,
    pub conv1: usize,
    pub pool1: usize,
    pub conv2: usize,
    pub pool2: usize,
    pub flattened: usize,
    pub dense1: usize,
    pub classes: usize,
}

impl ModelConfig {
    pub fn shapes(&self) -> Result<ShapeChain, NnError> {
        let bad = |m: String| NnError::InvalidConfig(m);
        if self.classes != NUM_CLASSES {
            return Err(bad(format!("output layer must have {NUM_CLASSES} units")));
        }
        let dims = [
            self.input_len,
            self.input_width,
            self.conv1_filters,
            self.conv1_width,
            self.pool_window,
            self.conv2_filters,
            self.conv2_width,
            self.dense1_units,
        ];
        if dims.contains(&0) {
            return Err(bad("every dimension must be positive".into()));
        }
        let shrink = |len: usize, width: usize, what: &str| {
            (len >= width)
                .then(|| len - width + 1)
                .ok_or_else(|| bad(format!("{what}: length {len} is shorter than width {width}")))
        };
        let pool = |len: usize, what: &str| {
            (len >= self.pool_window)
                .then(|| len / self.pool_window)
                .ok_or_else(|| bad(format!("{what}: length {len} cannot be pooled")))
        };
        let conv1 = shrink(self.input_len, self.conv1_width, "conv1")?;
        let pool1 = pool(conv1, "pool1")?;
        let conv2 = shrink(pool1, self.conv2_width, "conv2")?;
        let pool2 = pool(conv2, "pool2")?;
        Ok(ShapeChain {
            input: self.input_len,
            conv1,
            pool1,
            conv2,
            pool2,
            flattened: pool2 * self.conv2_filters,
            dense1: self.dense1_units,
            classes: self.classes,
        })
    }
}

/// All trainable tensors. Also used for gradients and optimizer moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Params<F> {
    pub conv1: Conv1d<F>,
    pub conv2: Conv1d<F>,
    pub dense1: Dense<F>,
    pub dense2: Dense<F>,
}

impl<F: Scalar> Params<F> {
    pub fn zeros(config: &ModelConfig) -> Result<Self, NnError> {
        let shapes = config.shapes()?;
        Ok(Params {
            conv1: Conv1d::zeros(config.conv1_filters, config.input_width, config.conv1_width),
            conv2: Conv1d::zeros(config.conv2_filters, config.conv1_filters, config.conv2_width),
            dense1: Dense::zeros(config.dense1_units, shapes.flattened),
            dense2: Dense::zeros(config.classes, config.dense1_units),
        })
    }

    /// Tensors in serialization order.
    pub fn tensors(&self) -> [&[F]; 8] {
        [
            &self.conv1.weight,
            &self.conv1.bias,
            &self.conv2.weight,
            &self.conv2.bias,
            &self.dense1.weight,
            &self.dense1.bias,
            &self.dense2.weight,
            &self.dense2.bias,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Vec<F>; 8] {
        [
            &mut self.conv1.weight,
            &mut self.conv1.bias,
            &mut self.conv2.weight,
            &mut self.conv2.bias,
            &mut self.dense1.weight,
            &mut self.dense1.bias,
            &mut self.dense2.weight,
            &mut self.dense2.bias,
        ]
    }

    pub fn len(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn scale(&mut self, factor: F) {
        for t in self.tensors_mut() {
            for v in t.iter_mut() {
                *v *= factor;
            }
        }
    }
}

/// Class prediction for one input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub label: Label,
    pub confidence: f64,
    pub probs: [f64; NUM_CLASSES],
}

impl Prediction {
    /// Arg-max over `probs`; the lowest class index wins ties.
    pub fn from_probs(probs: [f64; NUM_CLASSES]) -> Self {
        let mut best = 0;
        for i in 1..NUM_CLASSES {
            if probs[i] > probs[best] {
                best = i;
            }
        }
        Prediction {
            label: Label::from_index(best).expect("class index in range"),
            confidence: probs[best],
            probs,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model<F = f32> {
    pub config: ModelConfig,
    pub params: Params<F>,
    pub table_fingerprint: u64,
    shapes: ShapeChain,
}

/// Intermediate activations of one forward pass, kept for backprop.
struct Trace<F> {
    input: Matrix<F>,
    conv1: Matrix<F>,
    pool1: Pooled<F>,
    conv2: Matrix<F>,
    pool2: Pooled<F>,
    hidden: Vec<F>,
    probs: Vec<F>,
    logits: Vec<F>,
    /// Columns of `input` and of `pool1.output` before their constant tails.
    live_input: usize,
    live_pool1: usize,
}

impl<F: Scalar> Model<F> {
    /// All weights zero: every input maps to the uniform distribution.
    pub fn zeros(config: ModelConfig, table_fingerprint: u64) -> Result<Self, NnError> {
        let shapes = config.shapes()?;
        Ok(Model {
            params: Params::zeros(&config)?,
            config,
            table_fingerprint,
            shapes,
        })
    }

    /// Seeded fan-in scaled uniform initialization with zero biases:
    /// `±sqrt(6 / fan_in)` ahead of a rectifier, `±sqrt(3 / fan_in)` for the
    /// output layer.
    pub fn init(config: ModelConfig, table_fingerprint: u64, seed: u64) -> Result<Self, NnError> {
        let mut model = Self::zeros(config, table_fingerprint)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |w: &mut [F], fan_in: usize, gain: f64| {
            let limit = (gain / fan_in as f64).sqrt();
            let dist = Uniform::new_inclusive(-limit, limit);
            for v in w {
                *v = F::from(dist.sample(&mut rng)).expect("finite");
            }
        };
        let p = &mut model.params;
        fill(&mut p.conv1.weight, config.input_width * config.conv1_width, 6.0);
        fill(&mut p.conv2.weight, config.conv1_filters * config.conv2_width, 6.0);
        fill(&mut p.dense1.weight, model.shapes.flattened, 6.0);
        fill(&mut p.dense2.weight, config.dense1_units, 3.0);
        Ok(model)
    }

    pub fn from_params(
        config: ModelConfig,
        params: Params<F>,
        table_fingerprint: u64,
    ) -> Result<Self, NnError> {
        let expected = Params::<F>::zeros(&config)?;
        for (have, want) in params.tensors().iter().zip(expected.tensors()) {
            if have.len() != want.len() {
                return Err(NnError::ShapeMismatch(format!(
                    "parameter tensor of {} values, config needs {}",
                    have.len(),
                    want.len()
                )));
            }
        }
        Ok(Model {
            shapes: config.shapes()?,
            config,
            params,
            table_fingerprint,
        })
    }

    pub fn shapes(&self) -> ShapeChain {
        self.shapes
    }

    /// Converts to another element type, e.g. `f32` weights to `f64`.
    pub fn cast<G: Scalar>(&self) -> Model<G> {
        let conv = |c: &Conv1d<F>| Conv1d {
            filters: c.filters,
            channels: c.channels,
            width: c.width,
            weight: c.weight.iter().map(|&v| G::from(v).unwrap()).collect(),
            bias: c.bias.iter().map(|&v| G::from(v).unwrap()).collect(),
        };
        let dense = |d: &Dense<F>| Dense {
            outputs: d.outputs,
            inputs: d.inputs,
            weight: d.weight.iter().map(|&v| G::from(v).unwrap()).collect(),
            bias: d.bias.iter().map(|&v| G::from(v).unwrap()).collect(),
        };
        Model {
            config: self.config,
            params: Params {
                conv1: conv(&self.params.conv1),
                conv2: conv(&self.params.conv2),
                dense1: dense(&self.params.dense1),
                dense2: dense(&self.params.dense2),
            },
            table_fingerprint: self.table_fingerprint,
            shapes: self.shapes,
        }
    }

    /// Bits to a `width × length` matrix, one row per bit position.
    fn input_matrix(&self, sample: &EncodedFunction) -> Result<Matrix<F>, NnError> {
        if let Some(fp) = sample.table_fingerprint {
            if fp != self.table_fingerprint {
                return Err(NnError::TableMismatch {
                    model: self.table_fingerprint,
                    input: fp,
                });
            }
        }
        let (len, width) = (self.config.input_len, self.config.input_width);
        if sample.len() != len || width != TOKEN_BITS {
            return Err(NnError::ShapeMismatch(format!(
                "input is {}x{TOKEN_BITS}, model expects {len}x{width}",
                sample.len()
            )));
        }
        let mut m = Matrix::zeros(width, len);
        for (t, row) in sample.as_rows().chunks(TOKEN_BITS).enumerate() {
            for (c, &bit) in row.iter().enumerate() {
                if bit != 0 {
                    m.data[c * len + t] = F::one();
                }
            }
        }
        Ok(m)
    }

    fn pool(&self) -> MaxPool {
        MaxPool {
            window: self.config.pool_window,
        }
    }

    fn trace(&self, sample: &EncodedFunction) -> Result<Trace<F>, NnError> {
        let p = &self.params;
        let pool = self.pool();
        let input = self.input_matrix(sample)?;
        // Padding rows are zero, so everything downstream of them is constant
        // along the length axis. Track where that tail begins.
        let live_input = sample.true_length();
        let mut conv1 = p.conv1.forward_with_tail(&input, live_input)?;
        relu_in_place(&mut conv1.data);
        let pool1 = pool.forward(&conv1)?;
        let live_conv1 = live_input.min(conv1.cols);
        let live_pool1 = live_conv1.div_ceil(pool.window).min(pool1.output.cols);
        let mut conv2 = p.conv2.forward_with_tail(&pool1.output, live_pool1)?;
        relu_in_place(&mut conv2.data);
        let pool2 = pool.forward(&conv2)?;
        let mut hidden = p.dense1.forward(&pool2.output.data)?;
        relu_in_place(&mut hidden);
        let logits = p.dense2.forward(&hidden)?;
        let probs = softmax(&logits);
        Ok(Trace {
            input,
            conv1,
            pool1,
            conv2,
            pool2,
            hidden,
            probs,
            logits,
            live_input,
            live_pool1,
        })
    }

    /// Class probabilities for every input, in batch order.
    pub fn forward(&self, batch: &[EncodedFunction]) -> Result<Vec<[F; NUM_CLASSES]>, NnError> {
        batch
            .iter()
            .map(|s| {
                let probs = self.trace(s)?.probs;
                let mut row = [F::zero(); NUM_CLASSES];
                row.copy_from_slice(&probs);
                Ok(row)
            })
            .collect()
    }

    pub fn predict(&self, sample: &EncodedFunction) -> Result<Prediction, NnError> {
        let probs = self.forward(std::slice::from_ref(sample))?[0];
        Ok(Prediction::from_probs(probs.map(|p| p.to_f64().unwrap())))
    }

    /// Mean cross-entropy over the batch and its gradient with respect to
    /// every parameter.
    pub fn backward(
        &self,
        batch: &[EncodedFunction],
        targets: &[usize],
    ) -> Result<(Params<F>, F), NnError> {
        let mut grads = Params::zeros(&self.config)?;
        let (loss, _) = self.accumulate_gradients(batch, targets, &mut grads)?;
        let n = F::from(batch.len().max(1)).unwrap();
        grads.scale(F::one() / n);
        Ok((grads, loss / n))
    }

    /// Adds per-sample gradients (summed, not averaged) into `grads`, in
    /// batch order. Returns the summed loss and the number of correct
    /// arg-max predictions.
    pub(crate) fn accumulate_gradients(
        &self,
        batch: &[EncodedFunction],
        targets: &[usize],
        grads: &mut Params<F>,
    ) -> Result<(F, usize), NnError> {
        if batch.len() != targets.len() {
            return Err(NnError::ShapeMismatch(format!(
                "{} inputs but {} targets",
                batch.len(),
                targets.len()
            )));
        }
        if let Some(&bad) = targets.iter().find(|&&t| t >= NUM_CLASSES) {
            return Err(NnError::ShapeMismatch(format!("target class {bad} out of range")));
        }
        let mut loss = F::zero();
        let mut correct = 0;
        for (sample, &target) in batch.iter().zip(targets) {
            let trace = self.trace(sample)?;
            loss += cross_entropy(&trace.logits, target);
            let mut best = 0;
            for i in 1..NUM_CLASSES {
                if trace.probs[i] > trace.probs[best] {
                    best = i;
                }
            }
            correct += usize::from(best == target);
            self.backprop(&trace, target, grads)?;
        }
        Ok((loss, correct))
    }

    fn backprop(&self, t: &Trace<F>, target: usize, grads: &mut Params<F>) -> Result<(), NnError> {
        let p = &self.params;
        let pool = self.pool();

        let mut d_logits = t.probs.clone();
        d_logits[target] = d_logits[target] - F::one();
        let mut d_hidden = p
            .dense2
            .backward(&t.hidden, &d_logits, &mut grads.dense2, true)
            .expect("input gradient requested");
        relu_backward(&t.hidden, &mut d_hidden);
        let d_flat = p
            .dense1
            .backward(&t.pool2.output.data, &d_hidden, &mut grads.dense1, true)
            .expect("input gradient requested");
        let d_pool2 = Matrix::from_vec(t.pool2.output.rows, t.pool2.output.cols, d_flat)?;
        let mut d_conv2 = pool.backward(&t.pool2, &d_pool2, t.conv2.cols);
        relu_backward(&t.conv2.data, &mut d_conv2.data);
        let d_pool1 = p
            .conv2
            .backward_with_tail(&t.pool1.output, t.live_pool1, &d_conv2, &mut grads.conv2, true)?
            .expect("input gradient requested");
        let mut d_conv1 = pool.backward(&t.pool1, &d_pool1, t.conv1.cols);
        relu_backward(&t.conv1.data, &mut d_conv1.data);
        // The tail of d_pool1 is collapsed onto its first column, which pools
        // from conv1 columns that are themselves in conv1's constant tail.
        // conv1 only needs the sum over that tail.
        p.conv1
            .backward_with_tail(&t.input, t.live_input, &d_conv1, &mut grads.conv1, false)?;
        Ok(())
    }
}

/// `-ln softmax(logits)[target]`, computed without forming the softmax.
fn cross_entropy<F: Scalar>(logits: &[F], target: usize) -> F {
    let max = logits.iter().copied().fold(F::neg_infinity(), F::max);
    let sum = logits
        .iter()
        .map(|&z| (z - max).exp())
        .fold(F::zero(), |a, b| a + b);
    max + sum.ln() - logits[target]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::encode_ids;

    #[test]
    fn default_shape_chain() {
        let s = ModelConfig::default().shapes().unwrap();
        assert_eq!(
            (s.input, s.conv1, s.pool1, s.conv2, s.pool2, s.flattened, s.dense1, s.classes),
            (500, 496, 248, 244, 122, 15616, 64, 5)
        );
        let p = Params::<f32>::zeros(&ModelConfig::default()).unwrap();
        let sizes: Vec<_> = p.tensors().iter().map(|t| t.len()).collect();
        assert_eq!(sizes, [64 * 8 * 5, 64, 128 * 64 * 5, 128, 64 * 15616, 64, 5 * 64, 5]);
    }

    #[test]
    fn rejects_bad_configs() {
        let c = ModelConfig { classes: 4, ..Default::default() };
        assert!(c.shapes().is_err());
        let c = ModelConfig { input_len: 10, ..Default::default() };
        assert!(c.shapes().is_err());
    }

    #[test]
    fn zero_model_is_uniform() {
        let m = Model::<f32>::zeros(ModelConfig::default(), 1).unwrap();
        let probs = m.forward(&[encode_ids(&[1, 2, 3, 90], 500)]).unwrap();
        assert!(probs[0].iter().all(|&p| (p - 0.2).abs() < 1e-7));
        assert_eq!(m.predict(&encode_ids(&[4], 500)).unwrap().label, Label::Buffer);
    }

    #[test]
    fn argmax_ties_go_low() {
        let p = Prediction::from_probs([0.1, 0.1, 0.1, 0.1, 0.6]);
        assert_eq!((p.label, p.confidence), (Label::Clean, 0.6));
        let tie = Prediction::from_probs([0.2; 5]);
        assert_eq!(tie.label, Label::Buffer);
    }

    #[test]
    fn single_sample_loss_is_negative_log_prob() {
        let m = Model::<f64>::init(ModelConfig::default(), 0, 3).unwrap();
        let x = encode_ids(&[5, 9, 33, 40, 74, 90], 500);
        let p = m.forward(std::slice::from_ref(&x)).unwrap()[0];
        let (_, loss) = m.backward(&[x], &[2]).unwrap();
        assert!((loss + p[2].ln()).abs() < 1e-12);
    }

    #[test]
    fn guards() {
        let m = Model::<f32>::zeros(ModelConfig::default(), 7).unwrap();
        let wrong_len = encode_ids(&[1], 499);
        assert!(matches!(m.forward(&[wrong_len]), Err(NnError::ShapeMismatch(_))));
        let other_table = encode_ids(&[1], 500).with_table(8);
        assert!(matches!(
            m.forward(&[other_table]),
            Err(NnError::TableMismatch { model: 7, input: 8 })
        ));
        let same_table = encode_ids(&[1], 500).with_table(7);
        assert!(m.forward(&[same_table]).is_ok());
        assert!(m.backward(&[encode_ids(&[1], 500)], &[5]).is_err());
    }
}
