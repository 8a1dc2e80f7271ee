//! Latent-space Bayesian optimization for high-dimensional configuration tuning.
//!
//! The pipeline has three stages:
//!
//! 1. **Sample augmentation** — a small measured dataset is extended with
//!    Latin-Hypercube-sampled configurations labeled by a learned metric
//!    predictor, avoiding expensive benchmarking per sample.
//! 2. **Latent space generation** — an autoencoder compresses concatenated
//!    (configuration, metrics) vectors into a bounded low-dimensional cube,
//!    so the search space carries workload information.
//! 3. **Latent space optimization** — Gaussian-process Bayesian optimization
//!    with Expected Improvement runs inside the latent cube, scoring
//!    candidates with a second predictor, and the winning latent vector is
//!    decoded back into a full configuration.
//!
//! The `benchtarget` module ships synthetic workload profiles with planted
//! response surfaces so the whole pipeline can be exercised and measured
//! without a live database, plus an adapter for shelling out to a real
//! benchmark command.

pub mod baseline;
pub mod benchtarget;
pub mod cli;
pub mod domain;
pub mod error;
pub mod latent;
pub mod net;
pub mod predictor;
pub mod sampling;
pub mod surrogate;
pub mod tuner;
pub(crate) mod util;

pub use error::{Error, Result};
