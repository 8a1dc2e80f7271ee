//! Multi-output metric predictor: a per-feature sigmoid gate feeding a dense
//! regression network, trained on mean squared error over all outputs.
//!
//! The pipeline trains two independent instances of this model: one labels
//! LHS-sampled configurations during augmentation, the other substitutes for
//! benchmarking as the objective inside the optimization loop. The two never
//! share weights.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::domain::{normalize_config, Dataset, NormalizationSpec, Provenance};
use crate::error::{Error, Result};
use crate::net::{
    ensure_finite, epoch_batches, gather_rows, Activation, Adam, Net,
};
use crate::sampling::lhs_configs;
use crate::util::{derive_seed, rng_from_seed};

/// Epochs without validation improvement before training stops.
const EARLY_STOP_PATIENCE: usize = 30;
const GRAD_CLIP_NORM: f64 = 5.0;
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictorConfig {
    pub hidden_widths: Vec<usize>,
    pub gate_enabled: bool,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub validation_fraction: f64,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        PredictorConfig {
            hidden_widths: vec![128, 64],
            gate_enabled: true,
            learning_rate: 1e-3,
            epochs: 300,
            batch_size: 64,
            seed: 0,
            validation_fraction: 0.2,
        }
    }
}

impl PredictorConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.hidden_widths.iter().any(|w| *w == 0)
            || self.learning_rate <= 0.0
            || self.epochs == 0
            || self.batch_size == 0
        {
            return Err(Error::invalid("predictor config values must be positive"));
        }
        if !(0.0 < self.validation_fraction && self.validation_fraction < 0.5) {
            return Err(Error::invalid("validation_fraction must lie in (0, 0.5)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainingReport {
    pub initial_train_loss: f64,
    pub final_train_loss: f64,
    pub best_validation_loss: Option<f64>,
    pub epochs_run: usize,
}

/// A trained predictor. `input_dim` is `d` for the augmentation instance and
/// the latent dimension for the optimization instance; `output_dim` is always
/// the metric count.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictorModel {
    net: Net,
    pub input_dim: usize,
    pub output_dim: usize,
    pub report: TrainingReport,
}

impl PredictorModel {
    /// Gate values per input feature (`None` when the gate is disabled).
    pub fn gate_values(&self) -> Option<Vec<f64>> {
        self.net.gate_values()
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let doc = serde_json::json!({
            "version": CHECKPOINT_VERSION,
            "kind": "predictor",
            "model": self,
        });
        std::fs::write(path, serde_json::to_string(&doc)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<PredictorModel> {
        let text = std::fs::read_to_string(path)?;
        let doc: serde_json::Value = serde_json::from_str(&text)?;
        if doc["version"].as_u64() != Some(u64::from(CHECKPOINT_VERSION)) {
            return Err(Error::invalid("unsupported predictor checkpoint version"));
        }
        Ok(serde_json::from_value(doc["model"].clone())?)
    }
}

/// Train a predictor on unit-scaled inputs and targets.
///
/// Deterministic given `(X, Y, cfg)`. Training stops early when the
/// validation loss has not improved for [`EARLY_STOP_PATIENCE`] epochs and
/// the best-validation weights are restored.
pub fn fit(x: &Array2<f64>, y: &Array2<f64>, cfg: &PredictorConfig) -> Result<PredictorModel> {
    cfg.validate()?;
    let n = x.nrows();
    if n < 2 {
        return Err(Error::invalid(format!("fit requires at least 2 rows, got {n}")));
    }
    if y.nrows() != n {
        return Err(Error::shape(format!(
            "X has {n} rows but Y has {}",
            y.nrows()
        )));
    }
    ensure_finite(x, "predictor inputs")?;
    ensure_finite(y, "predictor targets")?;
    let p = x.ncols();
    let e = y.ncols();

    // Split off a validation set when there is room for one.
    let mut order: Vec<usize> = (0..n).collect();
    {
        use rand::seq::SliceRandom;
        let mut split_rng = rng_from_seed(derive_seed(cfg.seed, "predictor-split", 0));
        order.shuffle(&mut split_rng);
    }
    let n_val = ((n as f64) * cfg.validation_fraction).floor() as usize;
    let (train_idx, val_idx) = if n_val >= 1 && n - n_val >= 2 {
        (&order[n_val..], &order[..n_val])
    } else {
        (&order[..], &order[..0])
    };
    let x_train = gather_rows(x, train_idx);
    let y_train = gather_rows(y, train_idx);
    let x_val = gather_rows(x, val_idx);
    let y_val = gather_rows(y, val_idx);

    let mut net = Net::mlp(
        p,
        &cfg.hidden_widths,
        e,
        Activation::Softplus,
        Activation::Identity,
        cfg.gate_enabled,
        derive_seed(cfg.seed, "predictor-init", 0),
    );
    let n_train = x_train.nrows();
    let train_scale = 1.0 / (n_train * e) as f64;
    let initial_train_loss = net.scaled_sq_loss(&x_train, &y_train, train_scale);
    let initial_net = net.clone();

    let mut adam = Adam::new(net.params().len(), cfg.learning_rate, GRAD_CLIP_NORM);
    let mut batch_rng = rng_from_seed(derive_seed(cfg.seed, "predictor-batches", 0));
    let mut best_val = f64::INFINITY;
    let mut best_net: Option<Net> = None;
    let mut stale_epochs = 0;
    let mut epochs_run = 0;

    for _epoch in 0..cfg.epochs {
        for batch in epoch_batches(n_train, cfg.batch_size, &mut batch_rng) {
            let xb = gather_rows(&x_train, &batch);
            let yb = gather_rows(&y_train, &batch);
            let scale = 1.0 / (batch.len() * e) as f64;
            let mut grads = net.scaled_sq_grad(&xb, &yb, scale);
            adam.step(net.params_mut(), &mut grads);
        }
        epochs_run += 1;
        let train_loss = net.scaled_sq_loss(&x_train, &y_train, train_scale);
        if !train_loss.is_finite() {
            return Err(Error::TrainingDiverged(format!(
                "predictor loss became non-finite at epoch {epochs_run}"
            )));
        }
        if !val_idx.is_empty() {
            let val_scale = 1.0 / (x_val.nrows() * e) as f64;
            let val_loss = net.scaled_sq_loss(&x_val, &y_val, val_scale);
            if val_loss < best_val {
                best_val = val_loss;
                best_net = Some(net.clone());
                stale_epochs = 0;
            } else {
                stale_epochs += 1;
                if stale_epochs >= EARLY_STOP_PATIENCE {
                    break;
                }
            }
        }
    }

    if let Some(best) = best_net {
        net = best;
    }
    let mut final_train_loss = net.scaled_sq_loss(&x_train, &y_train, train_scale);
    if final_train_loss > initial_train_loss {
        // Training never improved on the starting point; keep the start.
        net = initial_net;
        final_train_loss = initial_train_loss;
    }

    Ok(PredictorModel {
        net,
        input_dim: p,
        output_dim: e,
        report: TrainingReport {
            initial_train_loss,
            final_train_loss,
            best_validation_loss: if best_val.is_finite() { Some(best_val) } else { None },
            epochs_run,
        },
    })
}

/// Predict metrics for a batch of inputs. Batch prediction equals
/// row-by-row prediction exactly.
pub fn predict(model: &PredictorModel, x: &Array2<f64>) -> Result<Array2<f64>> {
    if x.ncols() != model.input_dim {
        return Err(Error::shape(format!(
            "predict expects {} columns, got {}",
            model.input_dim,
            x.ncols()
        )));
    }
    if x.nrows() == 0 {
        return Ok(Array2::zeros((0, model.output_dim)));
    }
    Ok(model.net.forward(x))
}

/// Per-metric fit quality on a holdout set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// `1 - SSE/SST` per metric; `None` when the target column has zero
    /// variance and the ratio is undefined.
    pub r2: Vec<Option<f64>>,
    pub mse: Vec<f64>,
}

pub fn evaluate(model: &PredictorModel, x: &Array2<f64>, y: &Array2<f64>) -> Result<EvalReport> {
    if x.nrows() == 0 {
        return Err(Error::invalid("evaluate requires a non-empty holdout"));
    }
    if y.nrows() != x.nrows() || y.ncols() != model.output_dim {
        return Err(Error::shape("holdout shapes do not match the model"));
    }
    let pred = predict(model, x)?;
    let n = x.nrows() as f64;
    let mut r2 = Vec::with_capacity(model.output_dim);
    let mut mse = Vec::with_capacity(model.output_dim);
    for j in 0..model.output_dim {
        let col = y.column(j);
        let mean = col.sum() / n;
        let sse: f64 = (0..x.nrows()).map(|i| (pred[[i, j]] - y[[i, j]]).powi(2)).sum();
        let sst: f64 = col.iter().map(|v| (v - mean).powi(2)).sum();
        mse.push(sse / n);
        r2.push(if sst > 0.0 { Some(1.0 - sse / sst) } else { None });
    }
    Ok(EvalReport { r2, mse })
}

/// Extend a dataset with `m` predictor-labeled LHS configurations.
///
/// The predictor trains on the rows already present; sampled configurations
/// get their metrics from the model (clamped to the observed metric range)
/// and are appended with `Augmented` provenance. Existing rows are untouched.
pub fn augment(ds: &Dataset, cfg: &PredictorConfig, m: usize, seed: u64) -> Result<Dataset> {
    if ds.n_measured() < 2 {
        return Err(Error::invalid(
            "augmentation requires at least 2 measured rows",
        ));
    }
    if m == 0 {
        return Ok(ds.clone());
    }
    let spec = NormalizationSpec::from_dataset(ds)?;
    let n = ds.len();
    let d = ds.space.d();
    let e = ds.schema.e();

    let mut x = Array2::zeros((n, d));
    let mut y = Array2::zeros((n, e));
    for (i, row) in ds.rows().iter().enumerate() {
        let cu = normalize_config(&ds.space, &spec, &row.config)?;
        let mu = spec.normalize_metrics(&row.metrics)?;
        x.row_mut(i).assign(&ndarray::Array1::from(cu));
        y.row_mut(i).assign(&ndarray::Array1::from(mu));
    }
    let model = fit(&x, &y, cfg)?;

    let configs = lhs_configs(&ds.space, &spec, m, derive_seed(seed, "augment-lhs", 0))?;
    let mut xq = Array2::zeros((m, d));
    for (i, c) in configs.iter().enumerate() {
        let cu = normalize_config(&ds.space, &spec, c)?;
        xq.row_mut(i).assign(&ndarray::Array1::from(cu));
    }
    let pred = predict(&model, &xq)?;

    let mut out = ds.clone();
    for (i, c) in configs.into_iter().enumerate() {
        let unit: Vec<f64> = pred.row(i).iter().map(|v| v.clamp(0.0, 1.0)).collect();
        let metrics = spec.denormalize_metrics(&unit)?;
        out.push(c, metrics, Provenance::Augmented)?;
    }
    Ok(out)
}
