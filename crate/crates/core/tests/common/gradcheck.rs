//! Central finite differences against the hand-written backward passes.

use cvsc::encoding::{encode_ids, EncodedFunction};
use cvsc::nn::{Conv1d, Dense, Matrix, MaxPool, Model, ModelConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const EPS: f64 = 1e-5;
pub const MAX_REL_ERR: f64 = 1e-4;
/// Below this magnitude both gradients count as zero.
pub const ZERO_FLOOR: f64 = 1e-7;

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale < ZERO_FLOOR {
        0.0
    } else {
        (analytic - numeric).abs() / scale
    }
}

fn central(mut f: impl FnMut(f64) -> f64, x: f64) -> f64 {
    (f(x + EPS) - f(x - EPS)) / (2.0 * EPS)
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn weighted_sum(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Worst relative error over every weight, bias and input element of a
/// random convolution, for the loss `Σ out ⊙ r` with random `r`.
pub fn conv_layer(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (filters, channels, width, len) = (3, 4, 3, 11);
    let mut conv = Conv1d::<f64>::zeros(filters, channels, width);
    conv.weight = random_vec(&mut rng, conv.weight.len());
    conv.bias = random_vec(&mut rng, filters);
    let x = Matrix::from_vec(channels, len, random_vec(&mut rng, channels * len)).unwrap();
    let r = Matrix::from_vec(filters, len - width + 1, random_vec(&mut rng, filters * (len - width + 1))).unwrap();
    let loss = |c: &Conv1d<f64>, x: &Matrix<f64>| weighted_sum(&c.forward(x).unwrap().data, &r.data);

    let mut grad = Conv1d::zeros(filters, channels, width);
    let gx = conv.backward(&x, &r, &mut grad, true).unwrap().unwrap();
    let mut worst = 0.0f64;
    for i in 0..conv.weight.len() {
        let n = central(
            |v| {
                let mut c = conv.clone();
                c.weight[i] = v;
                loss(&c, &x)
            },
            conv.weight[i],
        );
        worst = worst.max(rel_err(grad.weight[i], n));
    }
    for i in 0..filters {
        let n = central(
            |v| {
                let mut c = conv.clone();
                c.bias[i] = v;
                loss(&c, &x)
            },
            conv.bias[i],
        );
        worst = worst.max(rel_err(grad.bias[i], n));
    }
    for i in 0..x.data.len() {
        let n = central(
            |v| {
                let mut xx = x.clone();
                xx.data[i] = v;
                loss(&conv, &xx)
            },
            x.data[i],
        );
        worst = worst.max(rel_err(gx.data[i], n));
    }
    worst
}

pub fn dense_layer(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (outputs, inputs) = (4, 7);
    let mut d = Dense::<f64>::zeros(outputs, inputs);
    d.weight = random_vec(&mut rng, outputs * inputs);
    d.bias = random_vec(&mut rng, outputs);
    let x = random_vec(&mut rng, inputs);
    let r = random_vec(&mut rng, outputs);
    let loss = |d: &Dense<f64>, x: &[f64]| weighted_sum(&d.forward(x).unwrap(), &r);

    let mut grad = Dense::zeros(outputs, inputs);
    let gx = d.backward(&x, &r, &mut grad, true).unwrap();
    let mut worst = 0.0f64;
    for i in 0..d.weight.len() {
        let n = central(
            |v| {
                let mut dd = d.clone();
                dd.weight[i] = v;
                loss(&dd, &x)
            },
            d.weight[i],
        );
        worst = worst.max(rel_err(grad.weight[i], n));
    }
    for i in 0..outputs {
        let n = central(
            |v| {
                let mut dd = d.clone();
                dd.bias[i] = v;
                loss(&dd, &x)
            },
            d.bias[i],
        );
        worst = worst.max(rel_err(grad.bias[i], n));
    }
    for i in 0..inputs {
        let n = central(
            |v| {
                let mut xx = x.clone();
                xx[i] = v;
                loss(&d, &xx)
            },
            x[i],
        );
        worst = worst.max(rel_err(gx[i], n));
    }
    worst
}

/// Max pooling, including a dropped trailing element. Random inputs are
/// distinct with probability one, so the maximum is locally stable.
pub fn pool_layer(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (rows, len) = (3, 9);
    let pool = MaxPool { window: 2 };
    let x = Matrix::from_vec(rows, len, random_vec(&mut rng, rows * len)).unwrap();
    let pooled = pool.forward(&x).unwrap();
    let r = Matrix::from_vec(rows, pooled.output.cols, random_vec(&mut rng, pooled.output.data.len())).unwrap();
    let gx = pool.backward(&pooled, &r, len);
    let mut worst = 0.0f64;
    for i in 0..x.data.len() {
        let n = central(
            |v| {
                let mut xx = x.clone();
                xx.data[i] = v;
                weighted_sum(&pool.forward(&xx).unwrap().output.data, &r.data)
            },
            x.data[i],
        );
        worst = worst.max(rel_err(gx.data[i], n));
    }
    worst
}

pub fn relu_layer(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Stay clear of the kink at zero.
    let x: Vec<f64> = random_vec(&mut rng, 16)
        .into_iter()
        .map(|v| if v.abs() < 0.01 { 0.5 } else { v })
        .collect();
    let r = random_vec(&mut rng, x.len());
    let relu = |x: &[f64]| {
        let mut y = x.to_vec();
        cvsc::nn::relu_in_place(&mut y);
        y
    };
    let mut g = r.clone();
    cvsc::nn::relu_backward(&relu(&x), &mut g);
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        let n = central(
            |v| {
                let mut xx = x.clone();
                xx[i] = v;
                weighted_sum(&relu(&xx), &r)
            },
            x[i],
        );
        worst = worst.max(rel_err(g[i], n));
    }
    worst
}

pub fn small_config() -> ModelConfig {
    ModelConfig {
        input_len: 20,
        conv1_filters: 4,
        conv2_filters: 8,
        dense1_units: 8,
        ..Default::default()
    }
}

pub fn random_batch(rng: &mut ChaCha8Rng, n: usize, len: usize) -> (Vec<EncodedFunction>, Vec<usize>) {
    let inputs = (0..n)
        .map(|_| {
            let k = rng.gen_range(1..=len + 4);
            let ids: Vec<u8> = (0..k).map(|_| rng.gen_range(1..=90)).collect();
            encode_ids(&ids, len)
        })
        .collect();
    let targets = (0..n).map(|_| rng.gen_range(0..5)).collect();
    (inputs, targets)
}

fn batch_loss(m: &Model<f64>, inputs: &[EncodedFunction], targets: &[usize]) -> f64 {
    let probs = m.forward(inputs).unwrap();
    probs.iter().zip(targets).map(|(p, &t)| -p[t].ln()).sum::<f64>() / inputs.len() as f64
}

/// Worst relative error per parameter tensor, in serialization order, for
/// the mean cross-entropy of a random batch through the whole network.
pub fn whole_model(seed: u64) -> [f64; 8] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let config = small_config();
    let mut model = Model::<f64>::init(config, 0, seed).unwrap();
    // Non-zero biases so that every bias gradient path is exercised.
    for t in [1, 3, 5, 7] {
        for b in model.params.tensors_mut()[t].iter_mut() {
            *b = rng.gen_range(-0.1..0.1);
        }
    }
    let (inputs, targets) = random_batch(&mut rng, 3, config.input_len);
    let (grads, _) = model.backward(&inputs, &targets).unwrap();
    let mut worst = [0.0f64; 8];
    #[allow(clippy::needless_range_loop)]
    for t in 0..8 {
        for i in 0..grads.tensors()[t].len() {
            let orig = model.params.tensors()[t][i];
            let n = central(
                |v| {
                    model.params.tensors_mut()[t][i] = v;
                    batch_loss(&model, &inputs, &targets)
                },
                orig,
            );
            model.params.tensors_mut()[t][i] = orig;
            worst[t] = worst[t].max(rel_err(grads.tensors()[t][i], n));
        }
    }
    worst
}
