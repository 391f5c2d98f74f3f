//! Finite-sample variances of the MMD estimators and the plug-in `σ̂`.
//!
//! The unbiased estimator's exact variance at sizes `(nX, nY)` is
//!
//! ```text
//! 4ζX/nX + 4ζY/nY + 2‖CP‖²/(nX(nX-1)) + 2‖CQ‖²/(nY(nY-1)) + 4⟨CP,CQ⟩/(nX nY)
//! ```
//!
//! which [`crate::oracle`] confirms by enumeration. The paired U-statistic
//! variance differs only in the `⟨CP,CQ⟩` coefficient, `4/(n(n-1))`, which is
//! strictly larger than `4/n²`.

use alloc::format;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::GramBlocks;
use crate::math;
use crate::numeric::compensated_sum;
use crate::oracle::PopulationFunctionals;

/// Closed-form variance summary.
///
/// From [`mmd_unbiased_variance`] the `zeta_hat_*` fields carry the
/// population `ζX`, `ζY` and `sigma_hat` the matching limit scale; from
/// [`plugin_report`] they are the plug-in estimates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    pub leading: f64,
    pub total: f64,
    pub zeta_hat_x: f64,
    pub zeta_hat_y: f64,
    pub sigma_hat: f64,
}

fn require_two(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::Parameter(format!("sample size {n} is below 2")));
    }
    Ok(())
}

/// Variance of a one-sample order-two U-statistic:
/// `4(n-2)/(n(n-1))·σ₁² + 2/(n(n-1))·Var h`.
pub fn ustat_variance(sigma1_sq_quarter: f64, var_h: f64, n: usize) -> Result<f64> {
    require_two(n)?;
    if sigma1_sq_quarter < 0.0 || var_h < 0.0 {
        return Err(Error::Parameter("variance components must be nonnegative".into()));
    }
    let nf = n as f64;
    let pairs = nf * (nf - 1.0);
    Ok(4.0 * (nf - 2.0) / pairs * sigma1_sq_quarter + 2.0 / pairs * var_h)
}

/// Exact variance of the paired U-statistic at `nX = nY = n`.
pub fn mmd_ustat_variance(f: &PopulationFunctionals, n: usize) -> Result<f64> {
    require_two(n)?;
    let nf = n as f64;
    Ok(4.0 / nf * (f.zeta_x + f.zeta_y)
        + 2.0 / (nf * (nf - 1.0)) * (f.hs_pp + f.hs_qq + 2.0 * f.hs_pq))
}

/// Rational prefactors of the unbiased estimator's exact variance.
///
/// Public so diagnostics can perturb one coefficient and confirm that the
/// enumeration check notices.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceCoefficients {
    pub zeta_x: f64,
    pub zeta_y: f64,
    pub hs_pp: f64,
    pub hs_qq: f64,
    pub hs_pq: f64,
}

impl VarianceCoefficients {
    pub fn unbiased(nx: usize, ny: usize) -> Result<Self> {
        require_two(nx)?;
        require_two(ny)?;
        let (fx, fy) = (nx as f64, ny as f64);
        Ok(Self {
            zeta_x: 4.0 / fx,
            zeta_y: 4.0 / fy,
            hs_pp: (2.0 / fx) / (fx - 1.0),
            hs_qq: (2.0 / fy) / (fy - 1.0),
            hs_pq: (4.0 / fx) / fy,
        })
    }

    pub fn leading(&self, f: &PopulationFunctionals) -> f64 {
        self.zeta_x * f.zeta_x + self.zeta_y * f.zeta_y
    }

    pub fn evaluate(&self, f: &PopulationFunctionals) -> f64 {
        compensated_sum([
            self.zeta_x * f.zeta_x,
            self.zeta_y * f.zeta_y,
            self.hs_pp * f.hs_pp,
            self.hs_qq * f.hs_qq,
            self.hs_pq * f.hs_pq,
        ])
    }
}

/// Exact variance of the unbiased estimator at sizes `(nx, ny)`.
pub fn mmd_unbiased_variance(
    f: &PopulationFunctionals,
    nx: usize,
    ny: usize,
) -> Result<VarianceReport> {
    let c = VarianceCoefficients::unbiased(nx, ny)?;
    Ok(VarianceReport {
        leading: c.leading(f),
        total: c.evaluate(f).max(0.0),
        zeta_hat_x: f.zeta_x,
        zeta_hat_y: f.zeta_y,
        sigma_hat: sigma_hat(f.zeta_x, f.zeta_y, nx, ny),
    })
}

/// The variance expression with an extra
/// `16(nX-2)(nY-2)/(nX nY (nX-1)(nY-1))·[⟨μP,CPμP⟩ + ⟨μQ,CQμQ⟩ − ζX − ζY]` term.
///
/// Kept for comparison only: enumeration shows this term should not be there,
/// and the two disagree whenever the bracket is nonzero.
pub fn mmd_unbiased_variance_as_printed(
    f: &PopulationFunctionals,
    nx: usize,
    ny: usize,
) -> Result<f64> {
    let exact = mmd_unbiased_variance(f, nx, ny)?.total;
    let (fx, fy) = (nx as f64, ny as f64);
    let prefactor = (16.0 / fx) * ((fx - 2.0) / (fx - 1.0)) * ((fy - 2.0) / fy) / (fy - 1.0);
    Ok(exact + prefactor * (f.mu_cp_mu + f.mu_cq_mu - f.zeta_x - f.zeta_y))
}

fn biased_cov(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = compensated_sum(a.iter().copied()) / n;
    let mb = compensated_sum(b.iter().copied()) / n;
    compensated_sum(a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb))) / n
}

/// Biased plug-in estimates `(ζ̂X, ζ̂Y)`.
///
/// `ζ̂X = V̂ar(a) + V̂ar(b) − 2Ĉov(a, b)` where `a_i` are the row means of
/// `Kxx` (diagonal included) and `b_i` the row means of `Kxy`, all moments
/// normalized by `nX`. `ζ̂Y` uses `Kyy` and the column means of `Kxy`.
pub fn plugin_zetas(blocks: &GramBlocks) -> (f64, f64) {
    let (nx, ny) = (blocks.nx(), blocks.ny());
    let row_means = |m: &crate::Matrix| -> alloc::vec::Vec<f64> {
        m.iter_rows()
            .map(|r| compensated_sum(r.iter().copied()) / r.len() as f64)
            .collect()
    };
    let a_x = row_means(blocks.kxx());
    let b_x = row_means(blocks.kxy());
    let a_y = row_means(blocks.kyy());
    let mut b_y = alloc::vec![0.0; ny];
    for row in blocks.kxy().iter_rows() {
        for (acc, v) in b_y.iter_mut().zip(row) {
            *acc += v;
        }
    }
    for v in &mut b_y {
        *v /= nx as f64;
    }
    let zeta = |a: &[f64], b: &[f64]| {
        (biased_cov(a, a) + biased_cov(b, b) - 2.0 * biased_cov(a, b)).max(0.0)
    };
    (zeta(&a_x, &b_x), zeta(&a_y, &b_y))
}

/// `sqrt(max(0, 4ρX·ζX + 4ρY·ζY))` with `ρ = min(nX, nY)/n`.
pub fn sigma_hat(zeta_x: f64, zeta_y: f64, nx: usize, ny: usize) -> f64 {
    let n = nx.min(ny) as f64;
    let (rho_x, rho_y) = (n / nx as f64, n / ny as f64);
    math::sqrt((4.0 * rho_x * zeta_x + 4.0 * rho_y * zeta_y).max(0.0))
}

/// Plug-in report for observed samples: `leading` uses the plug-in ζ values at
/// the observed sizes and `total` equals `leading`, the higher-order
/// functionals having no plug-in here.
pub fn plugin_report(blocks: &GramBlocks) -> VarianceReport {
    let (nx, ny) = (blocks.nx(), blocks.ny());
    let (zx, zy) = plugin_zetas(blocks);
    let leading = 4.0 * zx / nx as f64 + 4.0 * zy / ny as f64;
    VarianceReport {
        leading,
        total: leading,
        zeta_hat_x: zx,
        zeta_hat_y: zy,
        sigma_hat: sigma_hat(zx, zy, nx, ny),
    }
}
