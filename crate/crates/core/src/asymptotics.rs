//! Limit laws under the `n = min(nX, nY)` scaling.
//!
//! Under `P = Q`, `n·MMD̂²` converges to `(ρX + ρY) Σ_l λ_l (Z_l² − 1)` where
//! `ρ = lim n/n_group` and `λ_l` are the eigenvalues of the centered kernel
//! under `P`. Under `P ≠ Q`, `√n(MMD̂² − MMD²)` is asymptotically
//! `N(0, 4ρXζX + 4ρYζY)`.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::symmetric_eigenvalues_owned;
use crate::math;
use crate::matrix::Matrix;
use crate::numeric::compensated_sum;
use crate::rng::stream_rng;
use crate::stats;

/// Cap on retained eigenvalues.
pub const DEFAULT_MAX_EIGENVALUES: usize = 256;
/// Eigenvalues at or below this are dropped.
pub const EIGEN_ABS_TOL: f64 = 1e-10;
/// Eigenvalues at or below this multiple of the largest are dropped.
pub const EIGEN_REL_TOL: f64 = 1e-8;

const LIMIT_STREAM: u64 = 0x6c69_6d69_7400_0001;
const CHUNK: usize = 4096;

/// Weighted chi-square null limit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralModel {
    eigenvalues: Vec<f64>,
    rho_x: f64,
    rho_y: f64,
}

impl SpectralModel {
    /// Negative eigenvalues are clipped to zero and the list sorted descending.
    pub fn new(mut eigenvalues: Vec<f64>, rho_x: f64, rho_y: f64) -> Result<Self> {
        for rho in [rho_x, rho_y] {
            if !(0.0..=1.0).contains(&rho) {
                return Err(Error::Parameter(format!("ratio {rho} outside [0, 1]")));
            }
        }
        if rho_x != 1.0 && rho_y != 1.0 {
            return Err(Error::Parameter("one of the ratios must be 1".into()));
        }
        if eigenvalues.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("non-finite eigenvalue".into()));
        }
        for v in &mut eigenvalues {
            *v = v.max(0.0);
        }
        eigenvalues.sort_by(|a, b| b.total_cmp(a));
        Ok(Self {
            eigenvalues,
            rho_x,
            rho_y,
        })
    }

    /// Model with the finite-sample ratios `min(nX, nY)/n_group`.
    pub fn for_sizes(eigenvalues: Vec<f64>, nx: usize, ny: usize) -> Result<Self> {
        let (rx, ry) = rhos(nx, ny)?;
        Self::new(eigenvalues, rx, ry)
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn rho_x(&self) -> f64 {
        self.rho_x
    }

    pub fn rho_y(&self) -> f64 {
        self.rho_y
    }

    /// Variance of the limit: `2(ρX + ρY)² Σ λ²`.
    pub fn variance(&self) -> f64 {
        let s = self.rho_x + self.rho_y;
        2.0 * s * s * compensated_sum(self.eigenvalues.iter().map(|l| l * l))
    }
}

/// `(ρX, ρY) = (n/nX, n/nY)` with `n = min(nX, nY)`.
pub fn rhos(nx: usize, ny: usize) -> Result<(f64, f64)> {
    if nx == 0 || ny == 0 {
        return Err(Error::InsufficientSamples {
            needed: 1,
            got: 0,
        });
    }
    let n = nx.min(ny) as f64;
    Ok((n / nx as f64, n / ny as f64))
}

/// Eigenvalues of `HKH/n`, `H = I − 11ᵀ/n`, above the truncation thresholds,
/// descending, at most `max_count` of them.
pub fn estimate_null_eigenvalues(gram: &Matrix, max_count: usize) -> Result<Vec<f64>> {
    estimate_null_eigenvalues_owned(gram.clone(), max_count)
}

/// [`estimate_null_eigenvalues`] reusing the Gram storage.
pub fn estimate_null_eigenvalues_owned(gram: Matrix, max_count: usize) -> Result<Vec<f64>> {
    if !gram.is_square() {
        return Err(Error::Shape(format!(
            "Gram matrix must be square, got {}x{}",
            gram.rows(),
            gram.cols()
        )));
    }
    let n = gram.rows();
    if n < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: n });
    }
    let nf = n as f64;
    let row_means: Vec<f64> = gram
        .iter_rows()
        .map(|r| compensated_sum(r.iter().copied()) / nf)
        .collect();
    let grand = compensated_sum(row_means.iter().copied()) / nf;
    let (_, _, mut data) = gram.into_raw();
    for (i, row) in data.chunks_exact_mut(n).enumerate() {
        let ri = row_means[i];
        for (v, rj) in row.iter_mut().zip(&row_means) {
            *v = (*v - ri - rj + grand) / nf;
        }
    }
    let centered = Matrix::new(n, n, data)?;
    let values = symmetric_eigenvalues_owned(centered)?;
    let top = values.first().copied().unwrap_or(0.0).max(0.0);
    let cut = EIGEN_ABS_TOL.max(EIGEN_REL_TOL * top);
    Ok(values
        .into_iter()
        .filter(|v| *v > cut)
        .take(max_count)
        .collect())
}

/// `draws` i.i.d. samples of `(ρX + ρY) Σ λ_l (Z_l² − 1)`.
///
/// Draws are generated in fixed-size chunks, each from its own stream, so the
/// output depends only on `seed`.
pub fn sample_null_limit(model: &SpectralModel, draws: usize, seed: u64) -> Vec<f64> {
    let scale = model.rho_x + model.rho_y;
    let lambdas = &model.eigenvalues;
    let chunks = draws.div_ceil(CHUNK);
    let parts = crate::exec::map_indices(chunks, |c| {
        let len = CHUNK.min(draws - c * CHUNK);
        let mut rng = stream_rng(seed, &[LIMIT_STREAM, c as u64]);
        (0..len)
            .map(|_| {
                let mut acc = 0.0;
                for l in lambdas {
                    let z: f64 = rng.sample(StandardNormal);
                    acc += l * (z * z - 1.0);
                }
                scale * acc
            })
            .collect::<Vec<f64>>()
    });
    parts.into_iter().flatten().collect()
}

/// Upper `alpha` point of the null limit: the order statistic at index
/// `⌈(1 − alpha)·draws⌉` of [`sample_null_limit`].
pub fn null_quantile(model: &SpectralModel, alpha: f64, draws: usize, seed: u64) -> Result<f64> {
    check_alpha(alpha)?;
    if draws == 0 {
        return Err(Error::Parameter("need at least one draw".into()));
    }
    let samples = sample_null_limit(model, draws, seed);
    Ok(stats::upper_order_statistic(&samples, 1.0 - alpha))
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Parameter(format!("alpha {alpha} outside (0, 1)")));
    }
    Ok(())
}

/// Normal limit of the estimator under the alternative.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AltLimit {
    pub variance: f64,
    pub mean: f64,
}

impl AltLimit {
    /// cdf of the centered limit `√n(MMD̂² − mean)`; a step at 0 when the
    /// variance vanishes.
    pub fn centered_cdf(&self, t: f64) -> f64 {
        if self.variance <= 0.0 {
            return if t >= 0.0 { 1.0 } else { 0.0 };
        }
        stats::normal_cdf(t / math::sqrt(self.variance))
    }

    pub fn centered_quantile(&self, p: f64) -> f64 {
        math::sqrt(self.variance.max(0.0)) * stats::normal_quantile(p)
    }
}

pub fn alt_limit(zeta_x: f64, zeta_y: f64, rho_x: f64, rho_y: f64, mmd_sq: f64) -> Result<AltLimit> {
    if zeta_x < 0.0 || zeta_y < 0.0 || mmd_sq < 0.0 {
        return Err(Error::Parameter("limit inputs must be nonnegative".into()));
    }
    for rho in [rho_x, rho_y] {
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::Parameter(format!("ratio {rho} outside [0, 1]")));
        }
    }
    Ok(AltLimit {
        variance: 4.0 * rho_x * zeta_x + 4.0 * rho_y * zeta_y,
        mean: mmd_sq,
    })
}

/// `Φ(√n·mmd_sq/σ − c_α/(√n·σ))`.
pub fn power_approx(n: usize, mmd_sq: f64, sigma: f64, c_alpha: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::Parameter(format!("sigma must be positive, got {sigma}")));
    }
    if n == 0 {
        return Err(Error::Parameter("n must be at least 1".into()));
    }
    let root = math::sqrt(n as f64);
    Ok(stats::normal_cdf(root * mmd_sq / sigma - c_alpha / (root * sigma)))
}
