//! Layer primitives with hand-written backward passes.
//!
//! Activations are `channels × length` matrices stored row-major, one row
//! per channel. Convolutions are valid (unpadded) cross-correlations with
//! stride 1 along the length axis that span every input channel at once.

use super::{NnError, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<F> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<F>,
}

impl<F: Scalar> Matrix<F> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![F::zero(); rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<F>) -> Result<Self, NnError> {
        if data.len() != rows * cols {
            return Err(NnError::ShapeMismatch(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn row(&self, r: usize) -> &[F] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [F] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> F {
        self.data[r * self.cols + c]
    }
}

/// Convolution over the length axis. `weight` is laid out
/// `[filter][channel][offset]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1d<F> {
    pub filters: usize,
    pub channels: usize,
    pub width: usize,
    pub weight: Vec<F>,
    pub bias: Vec<F>,
}

impl<F: Scalar> Conv1d<F> {
    pub fn zeros(filters: usize, channels: usize, width: usize) -> Self {
        Conv1d {
            filters,
            channels,
            width,
            weight: vec![F::zero(); filters * channels * width],
            bias: vec![F::zero(); filters],
        }
    }

    pub fn out_len(&self, len: usize) -> Option<usize> {
        (len >= self.width && self.width > 0).then(|| len - self.width + 1)
    }

    fn check(&self, input: &Matrix<F>) -> Result<usize, NnError> {
        if input.rows != self.channels {
            return Err(NnError::ShapeMismatch(format!(
                "convolution expects {} channels, got {}",
                self.channels, input.rows
            )));
        }
        self.out_len(input.cols).ok_or_else(|| {
            NnError::ShapeMismatch(format!(
                "length {} is shorter than kernel width {}",
                input.cols, self.width
            ))
        })
    }

    pub fn forward(&self, input: &Matrix<F>) -> Result<Matrix<F>, NnError> {
        self.forward_with_tail(input, input.cols)
    }

    /// Forward pass for an input whose columns from `active` on are
    /// constant within each row, as they are over zero padding. Only the
    /// live outputs are convolved; the constant tail is computed once per
    /// filter. The result is bit-identical to [`Conv1d::forward`].
    pub fn forward_with_tail(&self, input: &Matrix<F>, active: usize) -> Result<Matrix<F>, NnError> {
        let out_len = self.check(input)?;
        let active = active.min(input.cols);
        debug_assert!(tail_is_constant(input, active));
        let live = out_len.min(active);
        let mut out = Matrix::zeros(self.filters, out_len);
        for f in 0..self.filters {
            let row = out.row_mut(f);
            row.fill(self.bias[f]);
            let mut tail = self.bias[f];
            for c in 0..self.channels {
                let x = input.row(c);
                let kernel = &self.weight[(f * self.channels + c) * self.width..][..self.width];
                for (k, &w) in kernel.iter().enumerate() {
                    if w == F::zero() {
                        continue;
                    }
                    for (o, &xv) in row[..live].iter_mut().zip(&x[k..k + live]) {
                        *o += w * xv;
                    }
                    if live < out_len {
                        tail += w * x[active];
                    }
                }
            }
            row[live..].fill(tail);
        }
        Ok(out)
    }

    /// Accumulates parameter gradients into `grad` and returns the gradient
    /// with respect to the input when `want_input` is set.
    pub fn backward(
        &self,
        input: &Matrix<F>,
        grad_out: &Matrix<F>,
        grad: &mut Conv1d<F>,
        want_input: bool,
    ) -> Result<Option<Matrix<F>>, NnError> {
        self.backward_with_tail(input, input.cols, grad_out, grad, want_input)
    }

    /// Backward pass matching [`Conv1d::forward_with_tail`]. Parameter
    /// gradients are exact. The input gradient is exact before `active`;
    /// the gradient of the whole constant tail of each row is summed into
    /// column `active` and the rest of the tail is left at zero.
    pub fn backward_with_tail(
        &self,
        input: &Matrix<F>,
        active: usize,
        grad_out: &Matrix<F>,
        grad: &mut Conv1d<F>,
        want_input: bool,
    ) -> Result<Option<Matrix<F>>, NnError> {
        let out_len = self.check(input)?;
        if grad_out.rows != self.filters || grad_out.cols != out_len {
            return Err(NnError::ShapeMismatch("convolution output gradient".into()));
        }
        let active = active.min(input.cols);
        let live = out_len.min(active);
        let mut grad_in = want_input.then(|| Matrix::zeros(self.channels, input.cols));
        // suffix[t] = Σ g[t..]
        let mut suffix = vec![F::zero(); out_len + 1];
        for f in 0..self.filters {
            let g = grad_out.row(f);
            if g.iter().all(|&v| v == F::zero()) {
                continue;
            }
            for t in (0..out_len).rev() {
                suffix[t] = suffix[t + 1] + g[t];
            }
            grad.bias[f] += suffix[0];
            for c in 0..self.channels {
                let x = input.row(c);
                let base = (f * self.channels + c) * self.width;
                for k in 0..self.width {
                    let mut s = dot(&g[..live], &x[k..k + live]);
                    if live < out_len {
                        s += x[active] * suffix[live];
                    }
                    grad.weight[base + k] += s;
                }
                if let Some(gi) = grad_in.as_mut() {
                    let gi_row = gi.row_mut(c);
                    for k in 0..self.width {
                        let w = self.weight[base + k];
                        let end = (k + live).min(active);
                        if end > k {
                            for (d, &gv) in gi_row[k..end].iter_mut().zip(g) {
                                *d += w * gv;
                            }
                        }
                        if active < input.cols {
                            gi_row[active] += w * suffix[active.saturating_sub(k).min(out_len)];
                        }
                    }
                }
            }
        }
        Ok(grad_in)
    }
}

fn tail_is_constant<F: Scalar>(m: &Matrix<F>, active: usize) -> bool {
    (0..m.rows).all(|r| {
        let row = m.row(r);
        row[active.min(row.len())..].iter().all(|&v| v == row[active.min(row.len().saturating_sub(1))])
    })
}

/// Dot product with eight independent accumulators so the loop vectorizes
/// without reassociation flags. Summation order is fixed.
fn dot<F: Scalar>(a: &[F], b: &[F]) -> F {
    let mut acc = [F::zero(); 8];
    let chunks = a.len() / 8;
    for i in 0..chunks {
        for j in 0..8 {
            acc[j] += a[i * 8 + j] * b[i * 8 + j];
        }
    }
    let mut tail = F::zero();
    for i in chunks * 8..a.len() {
        tail += a[i] * b[i];
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// Non-overlapping max pooling along the length axis. A trailing partial
/// window is dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MaxPool {
    pub window: usize,
}

/// Pooled values plus the flat input index each one came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Pooled<F> {
    pub output: Matrix<F>,
    pub argmax: Vec<usize>,
}

impl MaxPool {
    pub fn out_len(&self, len: usize) -> Option<usize> {
        (len >= self.window && self.window > 0).then(|| len / self.window)
    }

    pub fn forward<F: Scalar>(&self, input: &Matrix<F>) -> Result<Pooled<F>, NnError> {
        let out_len = self.out_len(input.cols).ok_or_else(|| {
            NnError::ShapeMismatch(format!(
                "cannot pool length {} with window {}",
                input.cols, self.window
            ))
        })?;
        let mut output = Matrix::zeros(input.rows, out_len);
        let mut argmax = vec![0; input.rows * out_len];
        for r in 0..input.rows {
            let x = input.row(r);
            for t in 0..out_len {
                let start = t * self.window;
                // First maximum wins ties.
                let mut best = start;
                for i in start + 1..start + self.window {
                    if x[i] > x[best] {
                        best = i;
                    }
                }
                output.data[r * out_len + t] = x[best];
                argmax[r * out_len + t] = r * input.cols + best;
            }
        }
        Ok(Pooled { output, argmax })
    }

    pub fn backward<F: Scalar>(
        &self,
        pooled: &Pooled<F>,
        grad_out: &Matrix<F>,
        input_len: usize,
    ) -> Matrix<F> {
        let mut grad_in = Matrix::zeros(grad_out.rows, input_len);
        for (&src, &g) in pooled.argmax.iter().zip(&grad_out.data) {
            grad_in.data[src] += g;
        }
        grad_in
    }
}

/// Fully connected layer; `weight` is `[output][input]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<F> {
    pub outputs: usize,
    pub inputs: usize,
    pub weight: Vec<F>,
    pub bias: Vec<F>,
}

impl<F: Scalar> Dense<F> {
    pub fn zeros(outputs: usize, inputs: usize) -> Self {
        Dense {
            outputs,
            inputs,
            weight: vec![F::zero(); outputs * inputs],
            bias: vec![F::zero(); outputs],
        }
    }

    pub fn forward(&self, input: &[F]) -> Result<Vec<F>, NnError> {
        if input.len() != self.inputs {
            return Err(NnError::ShapeMismatch(format!(
                "dense layer expects {} inputs, got {}",
                self.inputs,
                input.len()
            )));
        }
        Ok((0..self.outputs)
            .map(|o| self.bias[o] + dot(&self.weight[o * self.inputs..][..self.inputs], input))
            .collect())
    }

    pub fn backward(&self, input: &[F], grad_out: &[F], grad: &mut Dense<F>, want_input: bool) -> Option<Vec<F>> {
        let mut grad_in = want_input.then(|| vec![F::zero(); self.inputs]);
        for (o, &g) in grad_out.iter().enumerate() {
            if g == F::zero() {
                continue;
            }
            grad.bias[o] += g;
            let gw = &mut grad.weight[o * self.inputs..][..self.inputs];
            for (w, &x) in gw.iter_mut().zip(input) {
                *w += g * x;
            }
            if let Some(gi) = grad_in.as_mut() {
                for (d, &w) in gi.iter_mut().zip(&self.weight[o * self.inputs..][..self.inputs]) {
                    *d += g * w;
                }
            }
        }
        grad_in
    }
}

pub fn relu_in_place<F: Scalar>(xs: &mut [F]) {
    for x in xs {
        if *x < F::zero() {
            *x = F::zero();
        }
    }
}

/// Zeroes gradient entries whose activation was clipped. `activated` is the
/// rectifier's output.
pub fn relu_backward<F: Scalar>(activated: &[F], grad: &mut [F]) {
    for (g, &a) in grad.iter_mut().zip(activated) {
        if a <= F::zero() {
            *g = F::zero();
        }
    }
}

/// Numerically stable softmax.
pub fn softmax<F: Scalar>(logits: &[F]) -> Vec<F> {
    let max = logits.iter().copied().fold(F::neg_infinity(), F::max);
    let exps: Vec<F> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum = exps.iter().copied().fold(F::zero(), |a, b| a + b);
    exps.into_iter().map(|e| e / sum).collect()
}
