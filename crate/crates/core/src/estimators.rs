//! Unbiased MMD² estimators.
//!
//! [`mmd_unbiased`] works for any `nX, nY >= 2`:
//!
//! ```text
//! 2/(nX(nX-1)) Σ_{i<j} k(xi,xj) + 2/(nY(nY-1)) Σ_{i<j} k(yi,yj) - 2/(nX nY) Σ_{i,j} k(xi,yj)
//! ```
//!
//! [`mmd_ustat`] needs `nX = nY` and pairs `zi = (xi, yi)` in the given order;
//! it drops the `k(xi, yi)` cross terms. Both read only the cached Gram blocks.

use alloc::format;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{GramBlocks, Kernel, KernelSpec};
use crate::math;
use crate::matrix::{Matrix, SampleSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Unbiased,
    Ustat,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorValue {
    pub value: f64,
    pub kind: EstimatorKind,
    pub nx: usize,
    pub ny: usize,
}

/// `Σ_{i<j} m[i,j]`, accumulated per row then totalled.
pub(crate) fn upper_sum(m: &Matrix) -> f64 {
    let n = m.rows();
    let mut total = 0.0;
    for i in 0..n {
        let row = m.row(i);
        total += row[i + 1..].iter().sum::<f64>();
    }
    total
}

pub(crate) fn full_sum(m: &Matrix) -> f64 {
    m.iter_rows().map(|r| r.iter().sum::<f64>()).sum()
}

fn trace(m: &Matrix) -> f64 {
    (0..m.rows().min(m.cols())).map(|i| m.get(i, i)).sum()
}

fn require_two(nx: usize, ny: usize) -> Result<()> {
    let got = nx.min(ny);
    if got < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got });
    }
    Ok(())
}

/// The three-term unbiased estimator from the Gram blocks.
pub fn mmd_unbiased(blocks: &GramBlocks) -> Result<EstimatorValue> {
    let (nx, ny) = (blocks.nx(), blocks.ny());
    require_two(nx, ny)?;
    let (fx, fy) = (nx as f64, ny as f64);
    let xx = 2.0 * upper_sum(blocks.kxx()) / (fx * (fx - 1.0));
    let yy = 2.0 * upper_sum(blocks.kyy()) / (fy * (fy - 1.0));
    let xy = 2.0 * full_sum(blocks.kxy()) / (fx * fy);
    Ok(EstimatorValue {
        value: xx + yy - xy,
        kind: EstimatorKind::Unbiased,
        nx,
        ny,
    })
}

/// [`mmd_unbiased`] evaluated pair by pair without storing Gram blocks.
/// Memory stays `O(1)` beyond the samples, which suits large simulation sweeps.
pub fn mmd_unbiased_streaming(spec: &KernelSpec, samples: &SampleSet) -> Result<EstimatorValue> {
    let (nx, ny) = (samples.nx(), samples.ny());
    require_two(nx, ny)?;
    let kernel = spec.evaluator(samples.dim())?;
    let (fx, fy) = (nx as f64, ny as f64);
    let xx = 2.0 * streaming_upper_sum(&kernel, samples.x()) / (fx * (fx - 1.0));
    let yy = 2.0 * streaming_upper_sum(&kernel, samples.y()) / (fy * (fy - 1.0));
    let xy: f64 = samples
        .x()
        .iter_rows()
        .map(|a| samples.y().iter_rows().map(|b| kernel.eval(a, b)).sum::<f64>())
        .sum();
    Ok(EstimatorValue {
        value: xx + yy - 2.0 * xy / (fx * fy),
        kind: EstimatorKind::Unbiased,
        nx,
        ny,
    })
}

fn streaming_upper_sum(kernel: &Kernel, data: &Matrix) -> f64 {
    let n = data.rows();
    (0..n)
        .map(|i| {
            let a = data.row(i);
            (i + 1..n).map(|j| kernel.eval(a, data.row(j))).sum::<f64>()
        })
        .sum()
}

/// Paired U-statistic `1/(n(n-1)) Σ_{i≠j} h(zi, zj)` with
/// `h(zi, zj) = k(xi,xj) + k(yi,yj) - k(xi,yj) - k(xj,yi)`.
pub fn mmd_ustat(blocks: &GramBlocks) -> Result<EstimatorValue> {
    let (nx, ny) = (blocks.nx(), blocks.ny());
    if nx != ny {
        return Err(Error::Pairing { nx, ny });
    }
    require_two(nx, ny)?;
    let n = nx as f64;
    let xx = 2.0 * upper_sum(blocks.kxx());
    let yy = 2.0 * upper_sum(blocks.kyy());
    let xy = full_sum(blocks.kxy()) - trace(blocks.kxy());
    Ok(EstimatorValue {
        value: (xx + yy - 2.0 * xy) / (n * (n - 1.0)),
        kind: EstimatorKind::Ustat,
        nx,
        ny,
    })
}

/// Either estimator by kind.
pub fn estimate(blocks: &GramBlocks, kind: EstimatorKind) -> Result<EstimatorValue> {
    match kind {
        EstimatorKind::Unbiased => mmd_unbiased(blocks),
        EstimatorKind::Ustat => mmd_ustat(blocks),
    }
}

/// High-probability bound on `|mmd_unbiased - mmd_ustat|` for equal sizes `n`:
/// `8 · sup k(x,x) / n^{3/2} · sqrt(log(2/δ))`, holding with probability `1 - δ`.
pub fn gap_bound(kernel_sup: f64, n: usize, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Parameter(format!("delta must lie in (0, 1), got {delta}")));
    }
    if !(kernel_sup >= 0.0 && kernel_sup.is_finite()) {
        return Err(Error::Parameter(format!(
            "kernel supremum must be finite and nonnegative, got {kernel_sup}"
        )));
    }
    if n < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: n });
    }
    let n = n as f64;
    Ok(8.0 * kernel_sup / (n * math::sqrt(n)) * math::sqrt(math::ln(2.0 / delta)))
}
