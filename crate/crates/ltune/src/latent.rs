//! Latent space generation: an autoencoder trained to reconstruct
//! concatenated (configuration, metrics) vectors, with a bounded latent
//! layer so the optimization stage can search `[0,1]^l`.
//!
//! The training objective is the mean over rows of the squared Euclidean
//! reconstruction error.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::{ensure_finite, epoch_batches, gather_rows, Activation, Adam, LayerShape, Net};
use crate::util::{derive_seed, rng_from_seed};

const GRAD_CLIP_NORM: f64 = 5.0;
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AeConfig {
    pub latent_dim: usize,
    pub hidden_widths: Vec<usize>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for AeConfig {
    fn default() -> Self {
        AeConfig {
            latent_dim: 32,
            hidden_widths: vec![96, 64],
            learning_rate: 1e-3,
            epochs: 500,
            batch_size: 64,
            seed: 0,
        }
    }
}

impl AeConfig {
    pub fn with_latent_dim(mut self, l: usize) -> Self {
        self.latent_dim = l;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self, t: usize) -> Result<()> {
        if self.latent_dim == 0
            || self.hidden_widths.iter().any(|w| *w == 0)
            || self.learning_rate <= 0.0
            || self.epochs == 0
            || self.batch_size == 0
        {
            return Err(Error::invalid("autoencoder config values must be positive"));
        }
        if self.latent_dim >= t {
            return Err(Error::invalid(format!(
                "latent dimension {} must be smaller than the input dimension {t}",
                self.latent_dim
            )));
        }
        Ok(())
    }
}

/// Encoder/decoder pair with sigmoid latent and output layers, so
/// `encode` maps any finite input into `[0,1]^l` and `decode` maps
/// `[0,1]^l` into `[0,1]^t`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AutoencoderModel {
    net: Net,
    encoder_layers: usize,
    pub t: usize,
    pub l: usize,
    pub final_loss: f64,
    /// Reconstruction loss over the full training set after each epoch.
    pub loss_trace: Vec<f64>,
}

impl AutoencoderModel {
    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let doc = serde_json::json!({
            "version": CHECKPOINT_VERSION,
            "kind": "autoencoder",
            "model": self,
        });
        std::fs::write(path, serde_json::to_string(&doc)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<AutoencoderModel> {
        let text = std::fs::read_to_string(path)?;
        let doc: serde_json::Value = serde_json::from_str(&text)?;
        if doc["version"].as_u64() != Some(u64::from(CHECKPOINT_VERSION)) {
            return Err(Error::invalid("unsupported autoencoder checkpoint version"));
        }
        Ok(serde_json::from_value(doc["model"].clone())?)
    }
}

fn build_net(t: usize, cfg: &AeConfig) -> (Net, usize) {
    let mut shapes = Vec::new();
    let mut fan_in = t;
    for &h in &cfg.hidden_widths {
        shapes.push(LayerShape { fan_in, fan_out: h, act: Activation::Softplus });
        fan_in = h;
    }
    shapes.push(LayerShape { fan_in, fan_out: cfg.latent_dim, act: Activation::Sigmoid });
    let encoder_layers = shapes.len();
    fan_in = cfg.latent_dim;
    for &h in cfg.hidden_widths.iter().rev() {
        shapes.push(LayerShape { fan_in, fan_out: h, act: Activation::Softplus });
        fan_in = h;
    }
    shapes.push(LayerShape { fan_in, fan_out: t, act: Activation::Sigmoid });
    let net = Net::new(t, shapes, false, derive_seed(cfg.seed, "ae-init", 0));
    (net, encoder_layers)
}

/// Mean over rows of the squared Euclidean distance between paired rows of
/// `inputs` and `outputs`.
pub fn mean_reconstruction_loss(inputs: &Array2<f64>, outputs: &Array2<f64>) -> f64 {
    let n = inputs.nrows();
    let mut acc = 0.0;
    for (x, y) in inputs.iter().zip(outputs.iter()) {
        let e = x - y;
        acc += e * e;
    }
    acc / n as f64
}

/// Train the autoencoder on `(N+M) x t` unit-interval inputs.
pub fn train_autoencoder(inputs: &Array2<f64>, cfg: &AeConfig) -> Result<AutoencoderModel> {
    let n = inputs.nrows();
    let t = inputs.ncols();
    if n < 2 {
        return Err(Error::invalid(format!(
            "autoencoder training requires at least 2 rows, got {n}"
        )));
    }
    cfg.validate(t)?;
    ensure_finite(inputs, "autoencoder inputs")?;
    if inputs.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::invalid("autoencoder inputs must lie in [0,1]"));
    }

    let (mut net, encoder_layers) = build_net(t, cfg);
    let full_scale = 1.0 / n as f64;
    let initial_loss = net.scaled_sq_loss(inputs, inputs, full_scale);
    let initial_net = net.clone();

    let mut adam = Adam::new(net.params().len(), cfg.learning_rate, GRAD_CLIP_NORM);
    let mut batch_rng = rng_from_seed(derive_seed(cfg.seed, "ae-batches", 0));
    let mut loss_trace = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        for batch in epoch_batches(n, cfg.batch_size, &mut batch_rng) {
            let xb = gather_rows(inputs, &batch);
            let scale = 1.0 / batch.len() as f64;
            let mut grads = net.scaled_sq_grad(&xb, &xb, scale);
            adam.step(net.params_mut(), &mut grads);
        }
        let loss = net.scaled_sq_loss(inputs, inputs, full_scale);
        if !loss.is_finite() {
            return Err(Error::TrainingDiverged(format!(
                "autoencoder loss became non-finite at epoch {}",
                epoch + 1
            )));
        }
        loss_trace.push(loss);
    }

    let mut final_loss = *loss_trace.last().unwrap_or(&initial_loss);
    if final_loss > initial_loss {
        net = initial_net;
        final_loss = initial_loss;
    }
    Ok(AutoencoderModel {
        net,
        encoder_layers,
        t,
        l: cfg.latent_dim,
        final_loss,
        loss_trace,
    })
}

/// Compress a `t`-vector into the latent cube. Bounded for any finite input.
pub fn encode(model: &AutoencoderModel, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != model.t {
        return Err(Error::shape(format!(
            "encode expects length {}, got {}",
            model.t,
            x.len()
        )));
    }
    let batch = Array2::from_shape_vec((1, model.t), x.to_vec()).expect("row");
    Ok(model
        .net
        .forward_layers(&batch, 0, model.encoder_layers)
        .row(0)
        .to_vec())
}

/// Encode many rows at once.
pub fn encode_batch(model: &AutoencoderModel, x: &Array2<f64>) -> Result<Array2<f64>> {
    if x.ncols() != model.t {
        return Err(Error::shape(format!(
            "encode expects {} columns, got {}",
            model.t,
            x.ncols()
        )));
    }
    Ok(model.net.forward_layers(x, 0, model.encoder_layers))
}

/// Reconstruct a `t`-vector from a latent point in `[0,1]^l`.
pub fn decode(model: &AutoencoderModel, z: &[f64]) -> Result<Vec<f64>> {
    if z.len() != model.l {
        return Err(Error::shape(format!(
            "decode expects length {}, got {}",
            model.l,
            z.len()
        )));
    }
    if z.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::invalid("latent components must lie in [0,1]"));
    }
    let batch = Array2::from_shape_vec((1, model.l), z.to_vec()).expect("row");
    Ok(model
        .net
        .forward_layers(&batch, model.encoder_layers, model.net.num_layers())
        .row(0)
        .to_vec())
}

/// Reconstruction loss of the model on a set of inputs: the mean over rows
/// of the squared Euclidean error between each row and its decode(encode)
/// image.
pub fn reconstruction_loss(model: &AutoencoderModel, inputs: &Array2<f64>) -> Result<f64> {
    if inputs.nrows() == 0 {
        return Err(Error::invalid("reconstruction loss of an empty input set"));
    }
    if inputs.ncols() != model.t {
        return Err(Error::shape(format!(
            "inputs have {} columns, model expects {}",
            inputs.ncols(),
            model.t
        )));
    }
    let out = model.net.forward(inputs);
    Ok(mean_reconstruction_loss(inputs, &out))
}
