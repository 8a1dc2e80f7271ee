//! Dense feedforward network with hand-written backpropagation.
//!
//! Both learned components share this machinery: the metric predictor (an
//! optionally feature-gated regressor) and the autoencoder. Parameters live
//! in one flat vector so the optimizer, gradient checks, and checkpointing
//! all operate on a single array.

use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Identity,
    Sigmoid,
    Softplus,
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Sigmoid => sigmoid(x),
            Activation::Softplus => softplus(x),
        }
    }

    /// Derivative with respect to the pre-activation.
    fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Sigmoid => {
                let s = sigmoid(pre);
                s * (1.0 - s)
            }
            Activation::Softplus => sigmoid(pre),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerShape {
    pub fan_in: usize,
    pub fan_out: usize,
    pub act: Activation,
}

/// Feedforward net over a flat parameter vector.
///
/// Layout: `[gate raw weights (input_dim, if gated)] ++ per layer [W row-major
/// (fan_in x fan_out), b (fan_out)]`. The gate multiplies each input feature
/// by `sigmoid(gate_raw[i])` before the first layer.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Net {
    input_dim: usize,
    gated: bool,
    shapes: Vec<LayerShape>,
    params: Vec<f64>,
}

impl Net {
    /// Seeded construction: weights uniform in `±1/sqrt(fan_in)`, biases and
    /// gate raws zero (gate values start at 0.5).
    pub fn new(input_dim: usize, shapes: Vec<LayerShape>, gated: bool, seed: u64) -> Net {
        assert!(!shapes.is_empty());
        assert_eq!(shapes[0].fan_in, input_dim);
        for w in shapes.windows(2) {
            assert_eq!(w[0].fan_out, w[1].fan_in, "layer shapes must chain");
        }
        let mut rng = rng_from_seed(seed);
        let mut params = Vec::new();
        if gated {
            params.extend(std::iter::repeat(0.0).take(input_dim));
        }
        for s in &shapes {
            let bound = 1.0 / (s.fan_in as f64).sqrt();
            for _ in 0..s.fan_in * s.fan_out {
                params.push(rng.random_range(-bound..bound));
            }
            params.extend(std::iter::repeat(0.0).take(s.fan_out));
        }
        Net {
            input_dim,
            gated,
            shapes,
            params,
        }
    }

    /// Convenience constructor: hidden widths with one activation, then an
    /// output layer with another.
    pub fn mlp(
        input_dim: usize,
        hidden: &[usize],
        output_dim: usize,
        hidden_act: Activation,
        output_act: Activation,
        gated: bool,
        seed: u64,
    ) -> Net {
        let mut shapes = Vec::with_capacity(hidden.len() + 1);
        let mut fan_in = input_dim;
        for &h in hidden {
            shapes.push(LayerShape {
                fan_in,
                fan_out: h,
                act: hidden_act,
            });
            fan_in = h;
        }
        shapes.push(LayerShape {
            fan_in,
            fan_out: output_dim,
            act: output_act,
        });
        Net::new(input_dim, shapes, gated, seed)
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.shapes.last().unwrap().fan_out
    }

    pub fn num_layers(&self) -> usize {
        self.shapes.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Gate values `sigmoid(raw)` per input feature, if this net is gated.
    pub fn gate_values(&self) -> Option<Vec<f64>> {
        if self.gated {
            Some(self.params[..self.input_dim].iter().map(|g| sigmoid(*g)).collect())
        } else {
            None
        }
    }

    fn layer_offsets(&self) -> Vec<(usize, usize)> {
        // (weight offset, bias offset) per layer
        let mut off = if self.gated { self.input_dim } else { 0 };
        let mut out = Vec::with_capacity(self.shapes.len());
        for s in &self.shapes {
            let w = off;
            let b = off + s.fan_in * s.fan_out;
            off = b + s.fan_out;
            out.push((w, b));
        }
        debug_assert_eq!(off, self.params.len());
        out
    }

    fn weight_view(&self, layer: usize, offsets: &[(usize, usize)]) -> ArrayView2<'_, f64> {
        let s = self.shapes[layer];
        let (w, _) = offsets[layer];
        ArrayView2::from_shape((s.fan_in, s.fan_out), &self.params[w..w + s.fan_in * s.fan_out])
            .expect("contiguous weight block")
    }

    fn apply_gate(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut out = x.clone();
        if self.gated {
            let gate: Vec<f64> = self.params[..self.input_dim]
                .iter()
                .map(|g| sigmoid(*g))
                .collect();
            for mut row in out.rows_mut() {
                for (v, g) in row.iter_mut().zip(&gate) {
                    *v *= g;
                }
            }
        }
        out
    }

    /// Forward pass over layers `[from, to)`. The gate applies only when the
    /// pass starts at layer 0.
    pub fn forward_layers(&self, x: &Array2<f64>, from: usize, to: usize) -> Array2<f64> {
        let offsets = self.layer_offsets();
        let mut a = if from == 0 { self.apply_gate(x) } else { x.clone() };
        for layer in from..to {
            let s = self.shapes[layer];
            let (_, boff) = offsets[layer];
            let mut z = a.dot(&self.weight_view(layer, &offsets));
            let bias = &self.params[boff..boff + s.fan_out];
            for mut row in z.rows_mut() {
                for (v, b) in row.iter_mut().zip(bias) {
                    *v = s.act.apply(*v + *b);
                }
            }
            a = z;
        }
        a
    }

    pub fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        self.forward_layers(x, 0, self.shapes.len())
    }

    pub fn forward_one(&self, x: &[f64]) -> Vec<f64> {
        let batch = Array2::from_shape_vec((1, x.len()), x.to_vec()).expect("row vector");
        self.forward(&batch).row(0).to_vec()
    }

    /// Loss `scale * sum_i ||net(x_i) - y_i||^2` for the whole batch.
    pub fn scaled_sq_loss(&self, x: &Array2<f64>, y: &Array2<f64>, scale: f64) -> f64 {
        let out = self.forward(x);
        let mut acc = 0.0;
        for (o, t) in out.iter().zip(y.iter()) {
            let e = o - t;
            acc += e * e;
        }
        scale * acc
    }

    /// Analytic gradient of `scaled_sq_loss` with respect to every parameter,
    /// flat, in parameter-vector order.
    pub fn scaled_sq_grad(&self, x: &Array2<f64>, y: &Array2<f64>, scale: f64) -> Vec<f64> {
        let offsets = self.layer_offsets();
        let n_layers = self.shapes.len();
        let batch = x.nrows();

        // Forward, keeping pre-activations and activations per layer.
        let gated_input = self.apply_gate(x);
        let mut pre: Vec<Array2<f64>> = Vec::with_capacity(n_layers);
        let mut act: Vec<Array2<f64>> = Vec::with_capacity(n_layers);
        let mut a = gated_input.clone();
        for layer in 0..n_layers {
            let s = self.shapes[layer];
            let (_, boff) = offsets[layer];
            let mut z = a.dot(&self.weight_view(layer, &offsets));
            let bias = &self.params[boff..boff + s.fan_out];
            for mut row in z.rows_mut() {
                for (v, b) in row.iter_mut().zip(bias) {
                    *v += *b;
                }
            }
            let mut activated = z.clone();
            activated.mapv_inplace(|v| s.act.apply(v));
            pre.push(z);
            act.push(activated.clone());
            a = activated;
        }

        let mut grads = vec![0.0; self.params.len()];
        // d(loss)/d(output) for the squared loss.
        let mut d_act: Array2<f64> = act[n_layers - 1].clone();
        for (o, t) in d_act.iter_mut().zip(y.iter()) {
            *o = 2.0 * scale * (*o - t);
        }

        for layer in (0..n_layers).rev() {
            let s = self.shapes[layer];
            let (woff, boff) = offsets[layer];
            // dZ = dA * act'(Z)
            let mut d_z = d_act;
            for (dz, z) in d_z.iter_mut().zip(pre[layer].iter()) {
                *dz *= s.act.derivative(*z);
            }
            let below: &Array2<f64> = if layer == 0 { &gated_input } else { &act[layer - 1] };
            // dW = below^T . dZ ; db = column sums of dZ
            // (copy in logical order: dot may return a column-major array)
            let dw = below.t().dot(&d_z);
            for (g, v) in grads[woff..woff + s.fan_in * s.fan_out]
                .iter_mut()
                .zip(dw.iter())
            {
                *g = *v;
            }
            for row in d_z.rows() {
                for (g, v) in grads[boff..boff + s.fan_out].iter_mut().zip(row.iter()) {
                    *g += *v;
                }
            }
            // dA_below = dZ . W^T
            d_act = d_z.dot(&self.weight_view(layer, &offsets).t());
        }

        if self.gated {
            // d(gate raw)_i = sum_b dX_gated[b,i] * x[b,i] * g_i (1 - g_i)
            for i in 0..self.input_dim {
                let g = sigmoid(self.params[i]);
                let mut acc = 0.0;
                for b in 0..batch {
                    acc += d_act[[b, i]] * x[[b, i]];
                }
                grads[i] = acc * g * (1.0 - g);
            }
        }
        grads
    }
}

/// Adam with global-norm gradient clipping; the step sizes adapt per
/// parameter.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    clip_norm: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(n_params: usize, lr: f64, clip_norm: f64) -> Adam {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            clip_norm,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &mut [f64]) {
        let norm: f64 = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
        if norm > self.clip_norm {
            let s = self.clip_norm / norm;
            for g in grads.iter_mut() {
                *g *= s;
            }
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mhat = self.m[i] / bc1;
            let vhat = self.v[i] / bc2;
            params[i] -= self.lr * mhat / (vhat.sqrt() + self.eps);
        }
    }
}

/// Deterministic mini-batch index stream: a fresh seeded shuffle per epoch.
pub fn epoch_batches(n: usize, batch_size: usize, rng: &mut impl Rng) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    use rand::seq::SliceRandom;
    idx.shuffle(rng);
    idx.chunks(batch_size.max(1)).map(|c| c.to_vec()).collect()
}

/// Gather rows of `x` given by `idx` into a new dense batch.
pub fn gather_rows(x: &Array2<f64>, idx: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros((idx.len(), x.ncols()));
    for (k, &i) in idx.iter().enumerate() {
        out.row_mut(k).assign(&x.row(i));
    }
    out
}

/// Check a matrix for non-finite entries before training on it.
pub fn ensure_finite(x: &Array2<f64>, what: &str) -> Result<()> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("{what} contains non-finite values")));
    }
    Ok(())
}

pub fn mean_of(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn column_means(x: &Array2<f64>) -> Array1<f64> {
    let n = x.nrows().max(1) as f64;
    x.sum_axis(ndarray::Axis(0)) / n
}
