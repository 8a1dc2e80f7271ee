//! Latin Hypercube sampling of the unit hypercube and of raw parameter
//! spaces.
//!
//! Each dimension is split into `n` equal strata and every stratum receives
//! exactly one sample, which spreads the samples evenly along every axis.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::domain::{denormalize_config, Configuration, NormalizationSpec, ParameterSpace};
use crate::error::{Error, Result};
use crate::util::rng_from_seed;

/// A stratified sampling plan over `[0,1)^d`.
///
/// Invariant: for every dimension `j`, `{floor(matrix[i][j] * n)}` over all
/// rows is exactly `{0, 1, ..., n-1}`.
#[derive(Debug, Clone)]
pub struct LhsPlan {
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    pub matrix: Array2<f64>,
}

/// Draw a Latin Hypercube plan: per dimension, a seeded permutation assigns
/// each row to a stratum and a uniform offset places the sample inside it.
pub fn lhs_sample(d: usize, n: usize, seed: u64) -> Result<LhsPlan> {
    if d == 0 || n == 0 {
        return Err(Error::invalid(format!(
            "lhs_sample requires d >= 1 and n >= 1 (got d={d}, n={n})"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let mut matrix = Array2::zeros((n, d));
    let nf = n as f64;
    let mut strata: Vec<usize> = (0..n).collect();
    for j in 0..d {
        strata.sort_unstable();
        strata.shuffle(&mut rng);
        for (i, &k) in strata.iter().enumerate() {
            let offset: f64 = rng.random();
            let mut v = (k as f64 + offset) / nf;
            // Guard against the division pushing the value across a stratum
            // boundary; fall back to the stratum midpoint.
            if (v * nf).floor() as usize != k {
                v = (k as f64 + 0.5) / nf;
            }
            matrix[[i, j]] = v;
        }
    }
    Ok(LhsPlan { n, d, seed, matrix })
}

/// LHS-sample `n` full configurations: draw a unit-cube plan and denormalize
/// each row into raw parameter units.
pub fn lhs_configs(
    space: &ParameterSpace,
    spec: &NormalizationSpec,
    n: usize,
    seed: u64,
) -> Result<Vec<Configuration>> {
    let plan = lhs_sample(space.d(), n, seed)?;
    Ok(plan
        .matrix
        .rows()
        .into_iter()
        .map(|row| denormalize_config(space, spec, row.as_slice().expect("contiguous row")))
        .collect())
}
