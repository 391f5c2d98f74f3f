//! Permutation test with the unbiased estimator.
//!
//! The pooled Gram matrix is built once together with its row sums, diagonal
//! and total. A relabeling is determined by the index set `G` of the smaller
//! group, and all three block sums follow from sums over `G` alone:
//!
//! ```text
//! S_GG = Σ_{i,j∈G} K_ij     S_GH = Σ_{i∈G} r_i − S_GG     S_HH = T − S_GG − 2 S_GH
//! ```
//!
//! so each permuted statistic costs `O(min(nX, nY)²)`. The observed statistic
//! goes through the same path, which keeps ties with permuted values exact.

use alloc::format;
use alloc::vec::Vec;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::asymptotics::check_alpha;
use crate::error::{Error, Result};
use crate::kernels::{gram_matrix, KernelSpec};
use crate::matrix::{Matrix, SampleSet};
use crate::numeric::compensated_sum;
use crate::rng::{derive_seed, stream_rng};
use crate::sim::SampleDistribution;
use crate::stats;

const PERMUTATION_STREAM: u64 = 0x7065_726d_0000_0001;
const DATA_STREAM: u64 = 0x6461_7461_0000_0001;
const TEST_SEED: u64 = 0x7465_7374_0000_0001;

/// Cached pooled Gram matrix with the sums the relabeled statistic needs.
#[derive(Clone, Debug)]
pub struct PooledGram {
    k: Matrix,
    row_sums: Vec<f64>,
    diag_total: f64,
    total: f64,
    nx: usize,
    ny: usize,
}

impl PooledGram {
    pub fn new(spec: &KernelSpec, samples: &SampleSet) -> Result<Self> {
        let k = gram_matrix(spec, &samples.pooled())?;
        Self::from_gram(k, samples.nx())
    }

    /// Wrap a pooled Gram matrix whose first `nx` rows belong to `X`.
    pub fn from_gram(k: Matrix, nx: usize) -> Result<Self> {
        if !k.is_square() {
            return Err(Error::Shape("pooled Gram matrix must be square".into()));
        }
        let n = k.rows();
        if nx < 2 || n < nx + 2 {
            return Err(Error::InsufficientSamples {
                needed: 2,
                got: nx.min(n.saturating_sub(nx)),
            });
        }
        let row_sums: Vec<f64> = k.iter_rows().map(|r| compensated_sum(r.iter().copied())).collect();
        let diag_total = compensated_sum((0..n).map(|i| k.get(i, i)));
        let total = compensated_sum(row_sums.iter().copied());
        Ok(Self {
            k,
            row_sums,
            diag_total,
            total,
            nx,
            ny: n - nx,
        })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn gram(&self) -> &Matrix {
        &self.k
    }

    /// Size of the group whose indices define a relabeling.
    pub fn small_size(&self) -> usize {
        self.nx.min(self.ny)
    }

    fn small_is_x(&self) -> bool {
        self.nx <= self.ny
    }

    /// Pooled indices of the smaller group under the original labeling.
    pub fn observed_small_indices(&self) -> Vec<usize> {
        if self.small_is_x() {
            (0..self.nx).collect()
        } else {
            (self.nx..self.nx + self.ny).collect()
        }
    }

    /// Unbiased statistic when the smaller group consists of `small`.
    pub fn statistic(&self, small: &[usize]) -> f64 {
        let mut s_gg = 0.0;
        let mut d_g = 0.0;
        let mut r_g = 0.0;
        for &i in small {
            let row = self.k.row(i);
            let mut acc = 0.0;
            for &j in small {
                acc += row[j];
            }
            s_gg += acc;
            d_g += row[i];
            r_g += self.row_sums[i];
        }
        let s_gh = r_g - s_gg;
        let s_hh = self.total - s_gg - 2.0 * s_gh;
        let d_h = self.diag_total - d_g;
        let (ng, nh) = if self.small_is_x() {
            (self.nx, self.ny)
        } else {
            (self.ny, self.nx)
        };
        let (fg, fh) = (ng as f64, nh as f64);
        (s_gg - d_g) / (fg * (fg - 1.0)) + (s_hh - d_h) / (fh * (fh - 1.0)) - 2.0 * s_gh / (fg * fh)
    }

    /// Statistic under the `b`-th random relabeling for `seed`.
    pub fn permuted_statistic(&self, seed: u64, b: u64) -> f64 {
        let mut rng = stream_rng(seed, &[PERMUTATION_STREAM, b]);
        let n = self.nx + self.ny;
        let small = index::sample(&mut rng, n, self.small_size()).into_vec();
        self.statistic(&small)
    }
}

/// Outcome of a permutation test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub threshold: f64,
    pub reject: bool,
    pub alpha: f64,
    pub num_permutations: usize,
    pub seed: u64,
    pub n_x: usize,
    pub n_y: usize,
}

/// Permutation test of `P = Q` with `B = permutations` random relabelings.
///
/// `p = (1 + #{T_b ≥ T_obs})/(1 + B)`; the threshold is the permuted order
/// statistic at index `⌈(1 − α)B⌉`.
pub fn permutation_test(
    samples: &SampleSet,
    spec: &KernelSpec,
    alpha: f64,
    permutations: usize,
    seed: u64,
) -> Result<TestResult> {
    check_alpha(alpha)?;
    if permutations == 0 {
        return Err(Error::Parameter("need at least one permutation".into()));
    }
    if samples.nx() < 2 || samples.ny() < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            got: samples.nx().min(samples.ny()),
        });
    }
    let pooled = PooledGram::new(spec, samples)?;
    Ok(test_with_gram(&pooled, alpha, permutations, seed))
}

/// [`permutation_test`] on a prepared [`PooledGram`].
pub fn test_with_gram(pooled: &PooledGram, alpha: f64, permutations: usize, seed: u64) -> TestResult {
    let observed = pooled.statistic(&pooled.observed_small_indices());
    let permuted = crate::exec::map_indices(permutations, |b| pooled.permuted_statistic(seed, b as u64));
    let exceed = permuted.iter().filter(|t| **t >= observed).count();
    let p_value = (1 + exceed) as f64 / (1 + permutations) as f64;
    TestResult {
        statistic: observed,
        p_value,
        threshold: stats::upper_order_statistic(&permuted, 1.0 - alpha),
        reject: p_value <= alpha,
        alpha,
        num_permutations: permutations,
        seed,
        n_x: pooled.nx(),
        n_y: pooled.ny(),
    }
}

/// Monte Carlo rejection-rate sweep over `n_x` with fixed `n_y`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub p: SampleDistribution,
    pub q: SampleDistribution,
    pub kernel: KernelSpec,
    pub alpha: f64,
    pub permutations: usize,
    pub reps: usize,
    pub n_x: Vec<usize>,
    pub n_y: usize,
    pub seed: u64,
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        self.p.validate()?;
        self.q.validate()?;
        if self.p.dim() != self.q.dim() {
            return Err(Error::Shape("P and Q have different dimensions".into()));
        }
        if self.reps == 0 || self.permutations == 0 {
            return Err(Error::Parameter("reps and permutations must be positive".into()));
        }
        if self.n_y < 2 || self.n_x.iter().any(|n| *n < 2) {
            return Err(Error::Parameter("all sample sizes must be at least 2".into()));
        }
        if self.n_x.is_empty() {
            return Err(Error::Parameter("empty n_x sweep".into()));
        }
        Ok(())
    }
}

/// One point of a rejection-rate curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub n_x: usize,
    pub n_y: usize,
    pub rate: f64,
    pub stderr: f64,
}

/// Draw the samples for repetition `rep` of sweep point `point`.
pub fn simulate_samples(config: &SimulationConfig, point: usize, rep: usize) -> Result<SampleSet> {
    let nx = *config
        .n_x
        .get(point)
        .ok_or_else(|| Error::Parameter(format!("sweep point {point} out of range")))?;
    let mut rng = stream_rng(config.seed, &[DATA_STREAM, point as u64, rep as u64]);
    let x = config.p.sample(nx, &mut rng)?;
    let y = config.q.sample(config.n_y, &mut rng)?;
    SampleSet::new(x, y)
}

/// Run `reps` tests at each `n_x` and report rejection frequencies.
pub fn rejection_rate(config: &SimulationConfig) -> Result<Vec<RatePoint>> {
    config.validate()?;
    let mut out = Vec::with_capacity(config.n_x.len());
    for (point, &nx) in config.n_x.iter().enumerate() {
        let outcomes = crate::exec::map_indices(config.reps, |rep| -> Result<bool> {
            let samples = simulate_samples(config, point, rep)?;
            let seed = derive_seed(config.seed, &[TEST_SEED, point as u64, rep as u64]);
            let pooled = PooledGram::new(&config.kernel, &samples)?;
            Ok(test_with_gram(&pooled, config.alpha, config.permutations, seed).reject)
        });
        let mut rejections = 0usize;
        for o in outcomes {
            rejections += usize::from(o?);
        }
        let rate = rejections as f64 / config.reps as f64;
        out.push(RatePoint {
            n_x: nx,
            n_y: config.n_y,
            rate,
            stderr: stats::binomial_stderr(rate, config.reps),
        });
    }
    Ok(out)
}
