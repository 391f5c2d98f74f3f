//! Sampling distributions for simulation studies.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::mmd_unbiased_streaming;
use crate::kernels::KernelSpec;
use crate::matrix::{Matrix, SampleSet};
use crate::oracle::DiscreteDistribution;
use crate::rng::stream_rng;

const DRAW_STREAM: u64 = 0x6472_6177_0000_0001;

/// A distribution to draw synthetic samples from. The parametric families are
/// one-dimensional; `Discrete` carries its own dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SampleDistribution {
    /// `N(mean, sd²)`.
    Normal { mean: f64, sd: f64 },
    /// Laplace with location `loc` and scale `scale` (variance `2·scale²`).
    Laplace { loc: f64, scale: f64 },
    /// `loc + scale · T` with `T` Student-t on `df` degrees of freedom.
    StudentT { df: f64, loc: f64, scale: f64 },
    Discrete(DiscreteDistribution),
}

impl SampleDistribution {
    pub fn normal(mean: f64, sd: f64) -> Self {
        SampleDistribution::Normal { mean, sd }
    }

    pub fn laplace(loc: f64, scale: f64) -> Self {
        SampleDistribution::Laplace { loc, scale }
    }

    pub fn student_t(df: f64, loc: f64, scale: f64) -> Self {
        SampleDistribution::StudentT { df, loc, scale }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Parameter(format!("{name} must be positive, got {v}")))
            }
        };
        match self {
            SampleDistribution::Normal { mean, sd } => {
                positive("sd", *sd)?;
                finite("mean", *mean)
            }
            SampleDistribution::Laplace { loc, scale } => {
                positive("scale", *scale)?;
                finite("loc", *loc)
            }
            SampleDistribution::StudentT { df, loc, scale } => {
                positive("df", *df)?;
                positive("scale", *scale)?;
                finite("loc", *loc)
            }
            SampleDistribution::Discrete(_) => Ok(()),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            SampleDistribution::Discrete(d) => d.dim(),
            _ => 1,
        }
    }

    /// Draw `n` samples as an `n x dim` matrix.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Matrix> {
        self.validate()?;
        let values: Vec<f64> = match self {
            SampleDistribution::Normal { mean, sd } => (0..n)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(rng);
                    mean + sd * z
                })
                .collect::<Vec<f64>>(),
            SampleDistribution::Laplace { loc, scale } => (0..n)
                .map(|_| {
                    let a: f64 = Exp1.sample(rng);
                    let b: f64 = Exp1.sample(rng);
                    loc + scale * (a - b)
                })
                .collect(),
            SampleDistribution::StudentT { df, loc, scale } => {
                let t = StudentT::new(*df).map_err(|e| Error::Parameter(format!("{e}")))?;
                (0..n).map(|_| loc + scale * t.sample(rng)).collect()
            }
            SampleDistribution::Discrete(d) => return Ok(d.sample(n, rng)),
        };
        Matrix::new(n, 1, values)
    }
}

/// Draw `X ~ P^nx`, `Y ~ Q^ny` for repetition `rep`.
pub fn draw_samples(
    p: &SampleDistribution,
    q: &SampleDistribution,
    nx: usize,
    ny: usize,
    seed: u64,
    rep: u64,
) -> Result<SampleSet> {
    let mut rng = stream_rng(seed, &[DRAW_STREAM, nx as u64, ny as u64, rep]);
    let x = p.sample(nx, &mut rng)?;
    let y = q.sample(ny, &mut rng)?;
    SampleSet::new(x, y)
}

/// Unbiased MMD² over `reps` independent draws from [`draw_samples`].
pub fn statistic_draws(
    p: &SampleDistribution,
    q: &SampleDistribution,
    spec: &KernelSpec,
    (nx, ny): (usize, usize),
    reps: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    crate::exec::map_indices(reps, |rep| {
        let samples = draw_samples(p, q, nx, ny, seed, rep as u64)?;
        Ok(mmd_unbiased_streaming(spec, &samples)?.value)
    })
    .into_iter()
    .collect()
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!("{name} must be finite, got {v}")))
    }
}
