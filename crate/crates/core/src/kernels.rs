//! Kernel families and Gram matrices.
//!
//! Three families are supported:
//!
//! | family     | `k(x, y)`                     | parameters          |
//! |------------|-------------------------------|---------------------|
//! | `gaussian` | `exp(-‖x − y‖² / (2ℓ²))`      | `lengthscale` ℓ > 0 |
//! | `linear`   | `⟨x, y⟩`                      | none                |
//! | `triangle` | `max(1 − |x − y|, 0)`         | none, 1-D only      |
//!
//! The triangle kernel is positive definite on the real line only, so it
//! rejects inputs of any other dimension.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;
use crate::matrix::{Matrix, SampleSet};

pub const LENGTHSCALE: &str = "lengthscale";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    Gaussian,
    Linear,
    Triangle,
}

impl KernelFamily {
    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::Gaussian => "gaussian",
            KernelFamily::Linear => "linear",
            KernelFamily::Triangle => "triangle",
        }
    }

    /// Parameter names the family accepts.
    pub fn parameter_names(self) -> &'static [&'static str] {
        match self {
            KernelFamily::Gaussian => &[LENGTHSCALE],
            KernelFamily::Linear | KernelFamily::Triangle => &[],
        }
    }
}

impl core::str::FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(KernelFamily::Gaussian),
            "linear" => Ok(KernelFamily::Linear),
            "triangle" => Ok(KernelFamily::Triangle),
            other => Err(Error::Parameter(format!("unknown kernel family {other:?}"))),
        }
    }
}

#[derive(Deserialize)]
struct RawKernelSpec {
    family: KernelFamily,
    #[serde(default)]
    params: BTreeMap<String, f64>,
}

/// A validated member of one of the kernel families.
///
/// JSON form: `{"family": "gaussian", "params": {"lengthscale": 1.0}}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawKernelSpec")]
pub struct KernelSpec {
    family: KernelFamily,
    params: BTreeMap<String, f64>,
}

impl TryFrom<RawKernelSpec> for KernelSpec {
    type Error = Error;

    fn try_from(raw: RawKernelSpec) -> Result<Self> {
        KernelSpec::new(raw.family, raw.params)
    }
}

impl KernelSpec {
    pub fn new(family: KernelFamily, params: BTreeMap<String, f64>) -> Result<Self> {
        let allowed = family.parameter_names();
        if let Some(extra) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(Error::Parameter(format!(
                "{} kernel takes no parameter {extra:?}",
                family.name()
            )));
        }
        if family == KernelFamily::Gaussian {
            match params.get(LENGTHSCALE) {
                Some(&l) if l.is_finite() && l > 0.0 => {}
                Some(&l) => {
                    return Err(Error::Parameter(format!(
                        "gaussian lengthscale must be positive and finite, got {l}"
                    )))
                }
                None => return Err(Error::Parameter("gaussian kernel needs a lengthscale".into())),
            }
        }
        Ok(Self { family, params })
    }

    pub fn gaussian(lengthscale: f64) -> Result<Self> {
        let mut params = BTreeMap::new();
        params.insert(LENGTHSCALE.to_string(), lengthscale);
        Self::new(KernelFamily::Gaussian, params)
    }

    pub fn linear() -> Self {
        Self {
            family: KernelFamily::Linear,
            params: BTreeMap::new(),
        }
    }

    pub fn triangle() -> Self {
        Self {
            family: KernelFamily::Triangle,
            params: BTreeMap::new(),
        }
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.get(name).copied()
    }

    /// Copy of this spec with one parameter replaced, revalidated.
    pub fn with_param(&self, name: &str, value: f64) -> Result<Self> {
        let mut params = self.params.clone();
        params.insert(name.to_string(), value);
        Self::new(self.family, params)
    }

    /// `sup_x k(x, x)` when finite: 1 for the gaussian and triangle kernels.
    pub fn sup_diagonal(&self) -> Option<f64> {
        match self.family {
            KernelFamily::Gaussian | KernelFamily::Triangle => Some(1.0),
            KernelFamily::Linear => None,
        }
    }

    /// Compiled evaluator for inputs of dimension `dim`.
    pub fn evaluator(&self, dim: usize) -> Result<Kernel> {
        match self.family {
            KernelFamily::Gaussian => {
                let l = self.params[LENGTHSCALE];
                Ok(Kernel::Gaussian {
                    neg_inv_two_l2: -1.0 / (2.0 * l * l),
                })
            }
            KernelFamily::Linear => Ok(Kernel::Linear),
            KernelFamily::Triangle if dim == 1 => Ok(Kernel::Triangle),
            KernelFamily::Triangle => Err(Error::Shape(format!(
                "triangle kernel is only positive definite in one dimension, got d = {dim}"
            ))),
        }
    }
}

/// A kernel ready for repeated evaluation. Inputs are assumed to have equal
/// length; [`eval_kernel`] is the checked entry point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Kernel {
    Gaussian { neg_inv_two_l2: f64 },
    Linear,
    Triangle,
}

impl Kernel {
    #[inline]
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            Kernel::Gaussian { neg_inv_two_l2 } => {
                let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                math::exp(d2 * neg_inv_two_l2)
            }
            Kernel::Linear => x.iter().zip(y).map(|(a, b)| a * b).sum(),
            Kernel::Triangle => {
                let r = math::abs(x[0] - y[0]);
                if r >= 1.0 {
                    0.0
                } else {
                    1.0 - r
                }
            }
        }
    }
}

/// `k(x, y)` with shape and parameter checks.
pub fn eval_kernel(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!(
            "kernel inputs have dimensions {} and {}",
            x.len(),
            y.len()
        )));
    }
    Ok(spec.evaluator(x.len())?.eval(x, y))
}

/// The three kernel blocks of a two-sample problem. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct GramBlocks {
    kxx: Matrix,
    kyy: Matrix,
    kxy: Matrix,
}

impl GramBlocks {
    /// Assemble from precomputed blocks, checking shapes and exact symmetry.
    pub fn from_parts(kxx: Matrix, kyy: Matrix, kxy: Matrix) -> Result<Self> {
        let (nx, ny) = (kxx.rows(), kyy.rows());
        if !kxx.is_square() || !kyy.is_square() || kxy.rows() != nx || kxy.cols() != ny {
            return Err(Error::Shape(format!(
                "inconsistent gram blocks: Kxx {}x{}, Kyy {}x{}, Kxy {}x{}",
                kxx.rows(),
                kxx.cols(),
                kyy.rows(),
                kyy.cols(),
                kxy.rows(),
                kxy.cols()
            )));
        }
        for m in [&kxx, &kyy] {
            for i in 0..m.rows() {
                for j in 0..i {
                    if m.get(i, j) != m.get(j, i) {
                        return Err(Error::Shape("within-sample gram block is not symmetric".into()));
                    }
                }
            }
        }
        Ok(Self { kxx, kyy, kxy })
    }

    pub fn kxx(&self) -> &Matrix {
        &self.kxx
    }

    pub fn kyy(&self) -> &Matrix {
        &self.kyy
    }

    pub fn kxy(&self) -> &Matrix {
        &self.kxy
    }

    pub fn nx(&self) -> usize {
        self.kxx.rows()
    }

    pub fn ny(&self) -> usize {
        self.kyy.rows()
    }

    /// Pooled `(nX + nY)` square Gram matrix, `X` indices first.
    pub fn pooled(&self) -> Matrix {
        let (nx, ny) = (self.nx(), self.ny());
        let n = nx + ny;
        let mut out = Matrix::zeros(n, n);
        for i in 0..nx {
            let row = out.row_mut(i);
            row[..nx].copy_from_slice(self.kxx.row(i));
            row[nx..].copy_from_slice(self.kxy.row(i));
        }
        for j in 0..ny {
            let row = out.row_mut(nx + j);
            for i in 0..nx {
                row[i] = self.kxy.get(i, j);
            }
            row[nx..].copy_from_slice(self.kyy.row(j));
        }
        out
    }
}

/// Symmetric Gram matrix of one sample; upper triangle evaluated and mirrored.
pub fn gram_symmetric(kernel: &Kernel, data: &Matrix) -> Matrix {
    let n = data.rows();
    let mut out = Matrix::zeros(n, n);
    fill_upper(kernel, data, out.as_mut_slice(), n);
    for i in 0..n {
        for j in 0..i {
            let v = out.get(j, i);
            out.set(i, j, v);
        }
    }
    out
}

#[cfg(not(feature = "parallel"))]
fn fill_upper(kernel: &Kernel, data: &Matrix, out: &mut [f64], n: usize) {
    for (i, row) in out.chunks_mut(n.max(1)).enumerate().take(n) {
        let xi = data.row(i);
        for j in i..n {
            row[j] = kernel.eval(xi, data.row(j));
        }
    }
}

#[cfg(feature = "parallel")]
fn fill_upper(kernel: &Kernel, data: &Matrix, out: &mut [f64], n: usize) {
    use rayon::prelude::*;
    if n == 0 {
        return;
    }
    out.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        let xi = data.row(i);
        for j in i..n {
            row[j] = kernel.eval(xi, data.row(j));
        }
    });
}

/// Cross Gram matrix `K[i, j] = k(a_i, b_j)`.
pub fn gram_cross(kernel: &Kernel, a: &Matrix, b: &Matrix) -> Matrix {
    let (n, m) = (a.rows(), b.rows());
    let mut out = Matrix::zeros(n, m);
    if m == 0 {
        return out;
    }
    let fill = |(i, row): (usize, &mut [f64])| {
        let ai = a.row(i);
        for (j, v) in row.iter_mut().enumerate() {
            *v = kernel.eval(ai, b.row(j));
        }
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        out.as_mut_slice().par_chunks_mut(m).enumerate().for_each(fill);
    }
    #[cfg(not(feature = "parallel"))]
    out.as_mut_slice().chunks_mut(m).enumerate().for_each(fill);
    out
}

/// Evaluate all three Gram blocks of `samples` under `spec`.
pub fn gram_blocks(spec: &KernelSpec, samples: &SampleSet) -> Result<GramBlocks> {
    let kernel = spec.evaluator(samples.dim())?;
    Ok(GramBlocks {
        kxx: gram_symmetric(&kernel, samples.x()),
        kyy: gram_symmetric(&kernel, samples.y()),
        kxy: gram_cross(&kernel, samples.x(), samples.y()),
    })
}

/// Gram matrix of a single sample, checked.
pub fn gram_matrix(spec: &KernelSpec, data: &Matrix) -> Result<Matrix> {
    if data.rows() == 0 {
        return Err(Error::Shape("empty sample".into()));
    }
    Ok(gram_symmetric(&spec.evaluator(data.cols())?, data))
}
