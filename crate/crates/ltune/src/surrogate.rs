//! Gaussian-process surrogate over latent points and the Expected
//! Improvement acquisition.
//!
//! The kernel is squared-exponential with per-dimension length scales. The
//! posterior is computed through a Cholesky factor of `K + (noise+jitter)I`;
//! appending an observation extends the factor with one new row, which costs
//! `O(n^2)` and reproduces a full refit bit for bit.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::sampling::lhs_sample;

const BASE_JITTER: f64 = 1e-8;
const MAX_JITTER: f64 = 1e-4;
const FIXED_NOISE: f64 = 1e-6;
const HYPERFIT_SEARCH_ITERS: usize = 20;

/// Squared-exponential kernel with ARD length scales.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    pub signal_variance: f64,
    pub length_scales: Vec<f64>,
    pub noise: f64,
}

impl Kernel {
    pub fn new(signal_variance: f64, length_scales: Vec<f64>, noise: f64) -> Result<Kernel> {
        if signal_variance <= 0.0 || length_scales.iter().any(|l| *l <= 0.0) || noise < 0.0 {
            return Err(Error::invalid(
                "kernel needs positive signal variance and length scales, nonnegative noise",
            ));
        }
        Ok(Kernel {
            signal_variance,
            length_scales,
            noise,
        })
    }

    pub fn value(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut acc = 0.0;
        for ((x, y), l) in a.iter().zip(b).zip(&self.length_scales) {
            let d = (x - y) / l;
            acc += d * d;
        }
        self.signal_variance * (-0.5 * acc).exp()
    }

    /// Data-driven hyperparameters: signal variance from the sample variance
    /// of the scores, length scales from the per-dimension median pairwise
    /// distance, then a bounded coordinate search maximizing the log marginal
    /// likelihood. Noise stays fixed at a small constant.
    pub fn fit_from_data(z: &Array2<f64>, s: &[f64]) -> Result<Kernel> {
        let n = z.nrows();
        let l_dim = z.ncols();
        if n == 0 || s.len() != n {
            return Err(Error::shape("kernel fit needs matching, non-empty data"));
        }
        let mean = s.iter().sum::<f64>() / n as f64;
        let var = s.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let signal_variance = var.max(1e-12);

        // Median pairwise distance per dimension, on a deterministic
        // subsample when n is large.
        let cap = 256.min(n);
        let idx: Vec<usize> = (0..cap).map(|i| i * n / cap).collect();
        let mut length_scales = Vec::with_capacity(l_dim);
        let mut dists = Vec::with_capacity(cap * (cap - 1) / 2);
        for j in 0..l_dim {
            dists.clear();
            for (a_pos, &ia) in idx.iter().enumerate() {
                for &ib in &idx[a_pos + 1..] {
                    dists.push((z[[ia, j]] - z[[ib, j]]).abs());
                }
            }
            dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let median = if dists.is_empty() { 0.0 } else { dists[dists.len() / 2] };
            length_scales.push(median.max(1e-3));
        }

        let mut kernel = Kernel::new(signal_variance, length_scales, FIXED_NOISE)?;
        let mut best_lml = match log_marginal_likelihood(z, s, &kernel) {
            Some(v) => v,
            None => return Ok(kernel),
        };
        for step in 0..HYPERFIT_SEARCH_ITERS {
            let dim = step % l_dim;
            let current = kernel.length_scales[dim];
            for factor in [0.5, 2.0] {
                let mut trial = kernel.clone();
                trial.length_scales[dim] = (current * factor).clamp(1e-3, 1e3);
                if let Some(lml) = log_marginal_likelihood(z, s, &trial) {
                    if lml > best_lml {
                        best_lml = lml;
                        kernel = trial;
                    }
                }
            }
        }
        Ok(kernel)
    }
}

/// Lower-triangular Cholesky rows for `K + (noise+jitter)I`, computed one
/// row at a time so that appending an observation is incremental.
fn cholesky_row(
    chol: &mut Vec<f64>,
    kernel_row: &[f64],
    diag_boost: f64,
    n_before: usize,
) -> std::result::Result<(), ()> {
    // chol currently holds n_before rows of width n_before in packed
    // triangular layout: row i occupies chol[i*(i+1)/2 .. i*(i+1)/2 + i + 1].
    let base = n_before * (n_before + 1) / 2;
    chol.resize(base + n_before + 1, 0.0);
    for j in 0..n_before {
        let mut sum = kernel_row[j];
        let row_j = j * (j + 1) / 2;
        for k in 0..j {
            sum -= chol[base + k] * chol[row_j + k];
        }
        chol[base + j] = sum / chol[row_j + j];
    }
    let mut diag = kernel_row[n_before] + diag_boost;
    for k in 0..n_before {
        diag -= chol[base + k] * chol[base + k];
    }
    if diag <= 0.0 || !diag.is_finite() {
        chol.truncate(base);
        return Err(());
    }
    chol[base + n_before] = diag.sqrt();
    Ok(())
}

fn forward_solve(chol: &[f64], rhs: &mut [f64]) {
    let n = rhs.len();
    for i in 0..n {
        let row = i * (i + 1) / 2;
        let mut sum = rhs[i];
        for k in 0..i {
            sum -= chol[row + k] * rhs[k];
        }
        rhs[i] = sum / chol[row + i];
    }
}

fn backward_solve(chol: &[f64], rhs: &mut [f64]) {
    let n = rhs.len();
    for i in (0..n).rev() {
        let mut sum = rhs[i];
        for k in i + 1..n {
            sum -= chol[k * (k + 1) / 2 + i] * rhs[k];
        }
        rhs[i] = sum / chol[i * (i + 1) / 2 + i];
    }
}

fn log_marginal_likelihood(z: &Array2<f64>, s: &[f64], kernel: &Kernel) -> Option<f64> {
    let model = gp_fit(z.clone(), s.to_vec(), kernel.clone()).ok()?;
    let n = s.len();
    let data_fit: f64 = s.iter().zip(&model.alpha).map(|(a, b)| a * b).sum();
    let log_det: f64 = (0..n)
        .map(|i| model.chol[i * (i + 1) / 2 + i].ln())
        .sum();
    Some(-0.5 * data_fit - log_det - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln())
}

/// Gaussian-process posterior over latent points.
#[derive(Debug, Clone)]
pub struct GpModel {
    z: Array2<f64>,
    s: Vec<f64>,
    pub kernel: Kernel,
    /// Packed lower-triangular Cholesky factor of `K + (noise+jitter)I`.
    chol: Vec<f64>,
    alpha: Vec<f64>,
    jitter: f64,
    // training rows pre-scaled by 1/length_scale, plus their squared norms,
    // for the batched posterior
    z_scaled: Array2<f64>,
    z_sqnorm: Vec<f64>,
}

/// Fit the GP: factor the kernel matrix and solve for the weights. The
/// diagonal jitter doubles on failure until the factorization succeeds or
/// the jitter budget runs out.
pub fn gp_fit(z: Array2<f64>, s: Vec<f64>, kernel: Kernel) -> Result<GpModel> {
    let n = z.nrows();
    if n == 0 || s.len() != n {
        return Err(Error::shape(format!(
            "gp_fit needs one score per row ({} rows, {} scores)",
            n,
            s.len()
        )));
    }
    if z.iter().any(|v| !v.is_finite()) || s.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("gp_fit inputs must be finite"));
    }
    if kernel.length_scales.len() != z.ncols() {
        return Err(Error::shape("kernel dimension does not match the data"));
    }

    let mut jitter = BASE_JITTER;
    'attempt: loop {
        let mut chol: Vec<f64> = Vec::with_capacity(n * (n + 1) / 2);
        let mut kernel_row = vec![0.0; n];
        for i in 0..n {
            let zi = z.row(i);
            for j in 0..=i {
                kernel_row[j] = kernel.value(zi.as_slice().unwrap(), z.row(j).as_slice().unwrap());
            }
            if cholesky_row(&mut chol, &kernel_row[..=i], kernel.noise + jitter, i).is_err() {
                if jitter * 2.0 > MAX_JITTER {
                    return Err(Error::NotPositiveDefinite { jitter });
                }
                jitter *= 2.0;
                continue 'attempt;
            }
        }
        let mut alpha = s.clone();
        forward_solve(&chol, &mut alpha);
        backward_solve(&chol, &mut alpha);
        let mut model = GpModel {
            z,
            s,
            kernel,
            chol,
            alpha,
            jitter,
            z_scaled: Array2::zeros((0, 0)),
            z_sqnorm: Vec::new(),
        };
        model.rebuild_scaled();
        return Ok(model);
    }
}

impl GpModel {
    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    fn rebuild_scaled(&mut self) {
        let (n, l) = (self.z.nrows(), self.z.ncols());
        let mut scaled = Array2::zeros((n, l));
        let mut sqnorm = vec![0.0; n];
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..l {
                let v = self.z[[i, j]] / self.kernel.length_scales[j];
                scaled[[i, j]] = v;
                acc += v * v;
            }
            sqnorm[i] = acc;
        }
        self.z_scaled = scaled;
        self.z_sqnorm = sqnorm;
    }

    /// Posterior mean and standard deviation at one point.
    pub fn posterior(&self, z: &[f64]) -> Result<(f64, f64)> {
        if z.len() != self.z.ncols() {
            return Err(Error::shape(format!(
                "posterior point has length {}, model expects {}",
                z.len(),
                self.z.ncols()
            )));
        }
        let n = self.len();
        let mut k_star = vec![0.0; n];
        for i in 0..n {
            k_star[i] = self
                .kernel
                .value(z, self.z.row(i).as_slice().unwrap());
        }
        let mu: f64 = k_star.iter().zip(&self.alpha).map(|(a, b)| a * b).sum();
        forward_solve(&self.chol, &mut k_star);
        let explained: f64 = k_star.iter().map(|v| v * v).sum();
        let var = (self.kernel.signal_variance - explained).max(0.0);
        Ok((mu, var.sqrt()))
    }

    /// Posterior at many candidate points at once. Same math as
    /// [`GpModel::posterior`], organized as one matrix solve.
    pub fn posterior_batch(&self, candidates: &Array2<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
        let q = candidates.nrows();
        let l = self.z.ncols();
        if candidates.ncols() != l {
            return Err(Error::shape("candidate dimension mismatch"));
        }
        let n = self.len();
        // Scale candidates, take squared norms.
        let mut c_scaled = Array2::zeros((q, l));
        let mut c_sqnorm = vec![0.0; q];
        for i in 0..q {
            let mut acc = 0.0;
            for j in 0..l {
                let v = candidates[[i, j]] / self.kernel.length_scales[j];
                c_scaled[[i, j]] = v;
                acc += v * v;
            }
            c_sqnorm[i] = acc;
        }
        // Cross products (n x q), then kernel values in place.
        let mut k_star = self.z_scaled.dot(&c_scaled.t());
        if !k_star.is_standard_layout() {
            k_star = Array2::from_shape_vec((n, q), k_star.iter().cloned().collect())
                .expect("same element count");
        }
        let sv = self.kernel.signal_variance;
        for i in 0..n {
            let zn = self.z_sqnorm[i];
            let mut row = k_star.row_mut(i);
            let row = row.as_slice_mut().unwrap();
            for (kq, cn) in row.iter_mut().zip(&c_sqnorm) {
                let d2 = (zn + cn - 2.0 * *kq).max(0.0);
                *kq = sv * (-0.5 * d2).exp();
            }
        }
        // Means before the in-place solve consumes the buffer.
        let mut mu = vec![0.0; q];
        for i in 0..n {
            let a = self.alpha[i];
            let row = k_star.row(i);
            let row = row.as_slice().unwrap();
            for (m, v) in mu.iter_mut().zip(row) {
                *m += a * v;
            }
        }
        // V = L^{-1} K_star, row-blocked forward substitution.
        let buf = k_star.as_slice_mut().unwrap();
        let mut explained = vec![0.0; q];
        for i in 0..n {
            let (head, tail) = buf.split_at_mut(i * q);
            let row_i = &mut tail[..q];
            let chol_row = i * (i + 1) / 2;
            for j in 0..i {
                let lij = self.chol[chol_row + j];
                let row_j = &head[j * q..(j + 1) * q];
                for (v, w) in row_i.iter_mut().zip(row_j) {
                    *v -= lij * w;
                }
            }
            let inv = 1.0 / self.chol[chol_row + i];
            for (v, e) in row_i.iter_mut().zip(explained.iter_mut()) {
                *v *= inv;
                *e += *v * *v;
            }
        }
        let sigma: Vec<f64> = explained
            .iter()
            .map(|e| (sv - e).max(0.0).sqrt())
            .collect();
        Ok((mu, sigma))
    }

    /// Add one observation, extending the Cholesky factor by a row. Falls
    /// back to a full refit with escalated jitter if the new row breaks
    /// positive definiteness.
    pub fn append(&mut self, z: &[f64], s: f64) -> Result<()> {
        if z.len() != self.z.ncols() {
            return Err(Error::shape("appended point has the wrong dimension"));
        }
        let n = self.len();
        let mut kernel_row = vec![0.0; n + 1];
        for i in 0..n {
            kernel_row[i] = self.kernel.value(z, self.z.row(i).as_slice().unwrap());
        }
        kernel_row[n] = self.kernel.signal_variance;
        let ok = cholesky_row(&mut self.chol, &kernel_row, self.kernel.noise + self.jitter, n);

        self.z.push_row(ndarray::ArrayView1::from(z)).expect("row width");
        self.s.push(s);
        match ok {
            Ok(()) => {
                let mut alpha = self.s.clone();
                forward_solve(&self.chol, &mut alpha);
                backward_solve(&self.chol, &mut alpha);
                self.alpha = alpha;
                // extend the scaled cache
                let mut acc = 0.0;
                let scaled: Vec<f64> = z
                    .iter()
                    .zip(&self.kernel.length_scales)
                    .map(|(v, l)| {
                        let w = v / l;
                        acc += w * w;
                        w
                    })
                    .collect();
                self.z_scaled
                    .push_row(ndarray::ArrayView1::from(&scaled))
                    .expect("row width");
                self.z_sqnorm.push(acc);
                Ok(())
            }
            Err(()) => {
                // The extended matrix is no longer positive definite at the
                // current jitter; refit from scratch with escalation.
                let refit = gp_fit(self.z.clone(), self.s.clone(), self.kernel.clone())?;
                *self = refit;
                Ok(())
            }
        }
    }
}

/// Standard normal CDF through the complementary error function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Exploration constant and incumbent for Expected Improvement.
#[derive(Debug, Clone, Copy)]
pub struct AcquisitionParams {
    pub xi: f64,
    pub f_best: f64,
}

impl AcquisitionParams {
    pub fn new(xi: f64, f_best: f64) -> Result<Self> {
        if xi < 0.0 {
            return Err(Error::invalid("xi must be nonnegative"));
        }
        Ok(AcquisitionParams { xi, f_best })
    }
}

/// Expected improvement of a Gaussian posterior over the incumbent, in
/// maximization form:
/// `EI = (mu - f_best - xi) * Phi(gamma) + sigma * phi(gamma)` with
/// `gamma = (mu - f_best - xi) / sigma`. With `sigma = 0` this degenerates
/// to `max(0, mu - f_best - xi)`. Never negative.
pub fn expected_improvement(mu: f64, sigma: f64, params: &AcquisitionParams) -> f64 {
    let improvement = mu - params.f_best - params.xi;
    if sigma <= 0.0 {
        return improvement.max(0.0);
    }
    let gamma = improvement / sigma;
    (improvement * normal_cdf(gamma) + sigma * normal_pdf(gamma)).max(0.0)
}

/// Draw `q` LHS candidates over the latent cube, score each by EI, and
/// return the argmax (ties broken by the lowest candidate index). The
/// reported EI value is recomputed from the single-point posterior at the
/// winner so it matches `expected_improvement(posterior(z_next))` exactly.
pub fn propose(
    model: &GpModel,
    params: &AcquisitionParams,
    q: usize,
    seed: u64,
) -> Result<(Vec<f64>, f64)> {
    if q == 0 {
        return Err(Error::invalid("propose requires at least one candidate"));
    }
    let l = model.z.ncols();
    let plan = lhs_sample(l, q, seed)?;
    let (mu, sigma) = model.posterior_batch(&plan.matrix)?;
    let mut best_idx = 0;
    let mut best_ei = f64::NEG_INFINITY;
    for i in 0..q {
        let ei = expected_improvement(mu[i], sigma[i], params);
        if ei > best_ei {
            best_ei = ei;
            best_idx = i;
        }
    }
    let z_next = plan.matrix.row(best_idx).to_vec();
    let (m, s) = model.posterior(&z_next)?;
    Ok((z_next, expected_improvement(m, s, params)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::rng_from_seed;
    use proptest::prelude::*;
    use rand::Rng;

    fn simple_kernel(l_dim: usize) -> Kernel {
        Kernel::new(1.0, vec![0.3; l_dim], 0.0).unwrap()
    }

    fn random_points(n: usize, l: usize, seed: u64) -> Array2<f64> {
        let mut rng = rng_from_seed(seed);
        Array2::from_shape_fn((n, l), |_| rng.random_range(0.0..1.0))
    }

    #[test]
    fn single_point_interpolates() {
        let z = Array2::from_shape_vec((1, 2), vec![0.3, 0.7]).unwrap();
        let model = gp_fit(z, vec![3.0], simple_kernel(2)).unwrap();
        let (mu, sigma) = model.posterior(&[0.3, 0.7]).unwrap();
        assert!((mu - 3.0).abs() < 1e-6, "mu {mu}");
        assert!(sigma < 1e-3);
    }

    #[test]
    fn noise_free_fit_interpolates_all_points() {
        let z = Array2::from_shape_vec(
            (5, 2),
            vec![0.1, 0.1, 0.9, 0.2, 0.5, 0.5, 0.2, 0.8, 0.8, 0.9],
        )
        .unwrap();
        let s = vec![1.0, -2.0, 0.5, 3.0, -1.0];
        let model = gp_fit(z.clone(), s.clone(), simple_kernel(2)).unwrap();
        for i in 0..5 {
            let (mu, sigma) = model.posterior(z.row(i).as_slice().unwrap()).unwrap();
            assert!((mu - s[i]).abs() <= 1e-4, "point {i}: mu {mu} vs {}", s[i]);
            assert!(sigma <= 1e-4, "point {i}: sigma {sigma}");
        }
    }

    #[test]
    fn duplicate_points_with_conflicting_scores_regularize() {
        let z = Array2::from_shape_vec((2, 1), vec![0.5, 0.5]).unwrap();
        let model = gp_fit(z, vec![1.0, 2.0], simple_kernel(1)).unwrap();
        let (mu, _) = model.posterior(&[0.5]).unwrap();
        assert!(mu > 1.0 && mu < 2.0, "mu {mu} should sit between the scores");
    }

    #[test]
    fn far_from_data_reverts_to_prior() {
        let z = Array2::from_shape_vec((3, 1), vec![0.0, 0.01, 0.02]).unwrap();
        let kernel = Kernel::new(2.5, vec![0.01], 0.0).unwrap();
        let model = gp_fit(z, vec![5.0, 6.0, 7.0], kernel).unwrap();
        let (mu, sigma) = model.posterior(&[0.9]).unwrap();
        assert!(mu.abs() < 0.025, "mu {mu}");
        assert!((sigma * sigma - 2.5).abs() < 0.025, "var {}", sigma * sigma);
    }

    /// Dense inverse through Gauss-Jordan elimination; the oracle path shares
    /// nothing with the Cholesky implementation.
    fn dense_posterior_oracle(
        z: &Array2<f64>,
        s: &[f64],
        kernel: &Kernel,
        jitter: f64,
        x: &[f64],
    ) -> (f64, f64) {
        let n = s.len();
        let mut k = vec![vec![0.0; 2 * n]; n];
        for i in 0..n {
            for j in 0..n {
                k[i][j] = kernel.value(z.row(i).as_slice().unwrap(), z.row(j).as_slice().unwrap());
            }
            k[i][i] += kernel.noise + jitter;
            k[i][n + i] = 1.0;
        }
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&a, &b| k[a][col].abs().partial_cmp(&k[b][col].abs()).unwrap())
                .unwrap();
            k.swap(col, pivot);
            let p = k[col][col];
            for v in k[col].iter_mut() {
                *v /= p;
            }
            for row in 0..n {
                if row != col && k[row][col] != 0.0 {
                    let f = k[row][col];
                    for j in 0..2 * n {
                        k[row][j] -= f * k[col][j];
                    }
                }
            }
        }
        let inv: Vec<Vec<f64>> = k.iter().map(|row| row[n..].to_vec()).collect();
        let k_star: Vec<f64> = (0..n)
            .map(|i| kernel.value(x, z.row(i).as_slice().unwrap()))
            .collect();
        let mut mu = 0.0;
        let mut quad = 0.0;
        for i in 0..n {
            let mut w = 0.0;
            for j in 0..n {
                w += inv[i][j] * s[j];
                quad += k_star[i] * inv[i][j] * k_star[j];
            }
            mu += k_star[i] * w;
        }
        (mu, (kernel.value(x, x) - quad).max(0.0))
    }

    #[test]
    fn posterior_matches_dense_inverse_oracle() {
        let mut rng = rng_from_seed(99);
        for case in 0..25 {
            let n = 2 + (case * 7) % 40;
            let l = 1 + case % 6;
            let z = random_points(n, l, 1000 + case as u64);
            let s: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let kernel = Kernel::new(
                rng.random_range(0.5..2.0),
                (0..l).map(|_| rng.random_range(0.2..1.0)).collect(),
                rng.random_range(1e-4..1e-2),
            )
            .unwrap();
            let model = gp_fit(z.clone(), s.clone(), kernel.clone()).unwrap();
            let x: Vec<f64> = (0..l).map(|_| rng.random_range(0.0..1.0)).collect();
            let (mu, sigma) = model.posterior(&x).unwrap();
            let (mu_o, var_o) = dense_posterior_oracle(&z, &s, &kernel, model.jitter, &x);
            assert!((mu - mu_o).abs() < 1e-8, "case {case}: mu {mu} vs {mu_o}");
            assert!(
                (sigma * sigma - var_o).abs() < 1e-8,
                "case {case}: var {} vs {var_o}",
                sigma * sigma
            );
        }
    }

    #[test]
    fn batch_posterior_matches_single_closely() {
        let z = random_points(40, 3, 12);
        let mut rng = rng_from_seed(5);
        let s: Vec<f64> = (0..40).map(|_| rng.random_range(-1.0..1.0)).collect();
        let model = gp_fit(z, s, Kernel::new(1.0, vec![0.4, 0.3, 0.5], 1e-6).unwrap()).unwrap();
        let cands = random_points(64, 3, 77);
        let (mu_b, sigma_b) = model.posterior_batch(&cands).unwrap();
        for i in 0..cands.nrows() {
            let (mu, sigma) = model.posterior(cands.row(i).as_slice().unwrap()).unwrap();
            assert!((mu - mu_b[i]).abs() < 1e-10);
            assert!((sigma - sigma_b[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn append_reproduces_full_refit_exactly() {
        let all = random_points(35, 2, 3);
        let mut rng = rng_from_seed(8);
        let s_all: Vec<f64> = (0..35).map(|_| rng.random_range(-1.0..1.0)).collect();
        let kernel = Kernel::new(1.0, vec![0.5, 0.5], 1e-6).unwrap();

        let head = all.slice(ndarray::s![..30, ..]).to_owned();
        let mut incremental = gp_fit(head, s_all[..30].to_vec(), kernel.clone()).unwrap();
        for i in 30..35 {
            incremental
                .append(all.row(i).as_slice().unwrap(), s_all[i])
                .unwrap();
        }
        let full = gp_fit(all, s_all, kernel).unwrap();
        assert_eq!(incremental.chol, full.chol);
        assert_eq!(incremental.alpha, full.alpha);
    }

    #[test]
    fn refit_is_deterministic() {
        let z = random_points(20, 2, 9);
        let s: Vec<f64> = (0..20).map(|i| (i as f64).sin()).collect();
        let a = gp_fit(z.clone(), s.clone(), simple_kernel(2)).unwrap();
        let b = gp_fit(z, s, simple_kernel(2)).unwrap();
        assert_eq!(a.alpha, b.alpha);
    }

    #[test]
    fn cholesky_reconstructs_the_kernel_matrix() {
        let z = random_points(15, 3, 4);
        let mut rng = rng_from_seed(2);
        let s: Vec<f64> = (0..15).map(|_| rng.random_range(-1.0..1.0)).collect();
        let kernel = Kernel::new(1.3, vec![0.4, 0.6, 0.3], 1e-5).unwrap();
        let model = gp_fit(z.clone(), s, kernel.clone()).unwrap();
        for i in 0..15 {
            for j in 0..=i {
                let mut acc = 0.0;
                for k in 0..=j {
                    acc += model.chol[i * (i + 1) / 2 + k] * model.chol[j * (j + 1) / 2 + k];
                }
                let mut expected =
                    kernel.value(z.row(i).as_slice().unwrap(), z.row(j).as_slice().unwrap());
                if i == j {
                    expected += kernel.noise + model.jitter;
                }
                assert!((acc - expected).abs() < 1e-8, "entry ({i},{j})");
            }
        }
    }

    #[test]
    fn normal_functions_hit_reference_values() {
        assert_eq!(normal_cdf(0.0), 0.5);
        assert!((normal_pdf(0.0) - 0.3989422804014327).abs() < 1e-15);
        assert!((normal_cdf(1.96) - 0.9750021048517795).abs() < 1e-12);
        assert!((normal_cdf(-1.96) - 0.0249978951482205).abs() < 1e-12);
    }

    #[test]
    fn ei_closed_form_reference_points() {
        let p = AcquisitionParams::new(0.5, 1.0).unwrap();
        // mu = f_best + xi makes gamma zero: EI = sigma * phi(0)
        let ei = expected_improvement(1.5, 1.0, &p);
        assert!((ei - 0.3989422804014327).abs() < 1e-12, "ei {ei}");
        // degenerate sigma
        let p0 = AcquisitionParams::new(0.0, 1.0).unwrap();
        assert_eq!(expected_improvement(1.0, 0.0, &p0), 0.0);
        assert_eq!(expected_improvement(3.0, 0.0, &p0), 2.0);
        assert_eq!(expected_improvement(-3.0, 0.0, &p0), 0.0);
    }

    #[test]
    fn ei_grows_with_sigma_when_improvement_is_nonpositive() {
        let p = AcquisitionParams::new(0.01, 0.5).unwrap();
        for mu_step in 0..6 {
            let mu = 0.5 - 0.2 * mu_step as f64; // improvement <= 0
            let mut prev = expected_improvement(mu, 1e-9, &p);
            for sigma_step in 1..40 {
                let sigma = sigma_step as f64 * 0.05;
                let ei = expected_improvement(mu, sigma, &p);
                assert!(
                    ei + 1e-12 >= prev,
                    "EI should not shrink in sigma (mu {mu}, sigma {sigma})"
                );
                prev = ei;
            }
        }
    }

    #[test]
    fn propose_single_candidate_and_consistency() {
        let z = random_points(10, 2, 6);
        let s: Vec<f64> = (0..10).map(|i| i as f64 / 10.0).collect();
        let model = gp_fit(z, s, simple_kernel(2)).unwrap();
        let params = AcquisitionParams::new(0.01, 0.9).unwrap();
        let (z1, ei1) = propose(&model, &params, 1, 42).unwrap();
        assert_eq!(z1.len(), 2);
        let (mu, sigma) = model.posterior(&z1).unwrap();
        assert_eq!(ei1, expected_improvement(mu, sigma, &params));
        // determinism
        let (z2, ei2) = propose(&model, &params, 64, 7).unwrap();
        let (z3, ei3) = propose(&model, &params, 64, 7).unwrap();
        assert_eq!(z2, z3);
        assert_eq!(ei2, ei3);
        assert!(propose(&model, &params, 0, 1).is_err());
    }

    #[test]
    fn proposals_concentrate_near_the_best_observation() {
        // One planted high score with short length scales: proposals should
        // sit closer to the winner than to the loser across seeds.
        let z = Array2::from_shape_vec(
            (6, 2),
            vec![0.2, 0.2, 0.8, 0.8, 0.5, 0.1, 0.1, 0.6, 0.9, 0.3, 0.4, 0.9],
        )
        .unwrap();
        let s = vec![5.0, -5.0, 0.0, 0.0, 0.0, 0.0];
        let kernel = Kernel::new(4.0, vec![0.15, 0.15], 1e-6).unwrap();
        let model = gp_fit(z, s, kernel).unwrap();
        let params = AcquisitionParams::new(0.01, 5.0).unwrap();
        let dist = |a: &[f64], b: [f64; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        let mut to_best = Vec::new();
        let mut to_worst = Vec::new();
        for seed in 0..20 {
            let (z_next, _) = propose(&model, &params, 256, seed).unwrap();
            to_best.push(dist(&z_next, [0.2, 0.2]));
            to_worst.push(dist(&z_next, [0.8, 0.8]));
        }
        to_best.sort_by(|a, b| a.partial_cmp(b).unwrap());
        to_worst.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!(
            to_best[10] < to_worst[10],
            "median distance to best {} vs worst {}",
            to_best[10],
            to_worst[10]
        );
    }

    #[test]
    fn kernel_fit_produces_positive_hyperparameters() {
        let z = random_points(50, 3, 15);
        let mut rng = rng_from_seed(3);
        let s: Vec<f64> = (0..50).map(|_| rng.random_range(0.0..4.0)).collect();
        let kernel = Kernel::fit_from_data(&z, &s).unwrap();
        assert!(kernel.signal_variance > 0.0);
        assert!(kernel.length_scales.iter().all(|l| *l > 0.0));
        assert_eq!(kernel.noise, FIXED_NOISE);
        // constant scores floor the variance rather than zeroing it
        let flat = Kernel::fit_from_data(&z, &vec![1.0; 50]).unwrap();
        assert!(flat.signal_variance > 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn ei_is_never_negative(
            mu in -10.0_f64..10.0,
            sigma in 0.0_f64..5.0,
            f_best in -10.0_f64..10.0,
            xi in 0.0_f64..1.0,
        ) {
            let p = AcquisitionParams::new(xi, f_best).unwrap();
            prop_assert!(expected_improvement(mu, sigma, &p) >= 0.0);
        }
    }
}
