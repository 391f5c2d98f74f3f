//! Ground truth for finite discrete distributions.
//!
//! Population functionals are finite sums over support points, written only in
//! terms of kernel evaluations:
//!
//! * `μP(x) = Σ_a p_a k(x, s_a)`
//! * `MMD² = ‖μP − μQ‖²`
//! * `ζX = Var_{X~P}[μP(X) − μQ(X)] = ⟨μP − μQ, CP(μP − μQ)⟩` (and `ζY` under `Q`)
//! * `‖CP‖²_HS = E_{X,X'~P}[k̃P(X, X')²]` with `k̃P` the `P`-doubly-centered kernel
//! * `⟨CP, CQ⟩_HS = E_{X~P,Y~Q}[(k(X,Y) − μQ(X) − μP(Y) + ⟨μP, μQ⟩)²]`
//! * `⟨μP, CP μP⟩ = Var_{X~P}[μP(X)]`
//!
//! [`brute_force_moments`] and [`brute_force_gen_u_moments`] enumerate every
//! sample tuple with its product probability, and [`enumerate_zeta_table`]
//! computes conditional-expectation variances the same way. None of them use
//! the closed forms they are compared against.

use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{self, EstimatorKind};
use crate::genustat::{GenUSpec, ZetaTable};
use crate::kernels::{gram_cross, GramBlocks, Kernel, KernelSpec};
use crate::matrix::Matrix;
use crate::numeric::CompensatedSum;

/// Default cap on enumerated sample tuples.
pub const DEFAULT_ENUMERATION_CAP: u64 = 10_000_000;

/// Default absolute tolerance for degeneracy decisions.
pub const DEFAULT_DEGENERACY_TOL: f64 = 1e-10;

#[derive(Deserialize)]
struct RawDiscrete {
    support: Matrix,
    probs: Vec<f64>,
}

/// Finite distribution on distinct support points.
///
/// JSON form: `{"support": [[...], ...], "probs": [...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDiscrete")]
pub struct DiscreteDistribution {
    support: Matrix,
    probs: Vec<f64>,
}

impl TryFrom<RawDiscrete> for DiscreteDistribution {
    type Error = Error;

    fn try_from(raw: RawDiscrete) -> Result<Self> {
        DiscreteDistribution::new(raw.support, raw.probs)
    }
}

impl DiscreteDistribution {
    pub fn new(support: Matrix, probs: Vec<f64>) -> Result<Self> {
        if support.rows() == 0 {
            return Err(Error::Distribution("empty support".into()));
        }
        if support.rows() != probs.len() {
            return Err(Error::Distribution(format!(
                "{} support points but {} probabilities",
                support.rows(),
                probs.len()
            )));
        }
        if let Some(p) = probs.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(Error::Distribution(format!("invalid probability {p}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Distribution(format!("probabilities sum to {total}")));
        }
        for i in 0..support.rows() {
            for j in 0..i {
                if support.row(i) == support.row(j) {
                    return Err(Error::Distribution(format!(
                        "support rows {j} and {i} coincide"
                    )));
                }
            }
        }
        Ok(Self { support, probs })
    }

    /// Uniform distribution over the given 1-D points.
    pub fn uniform_1d(points: &[f64]) -> Result<Self> {
        let n = points.len();
        Self::new(Matrix::column(points), vec![1.0 / n as f64; n])
    }

    /// A single atom.
    pub fn point_mass(point: &[f64]) -> Result<Self> {
        Self::new(Matrix::from_rows(&[point])?, vec![1.0])
    }

    pub fn support(&self) -> &Matrix {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.support.cols()
    }

    /// Draw `n` i.i.d. rows by inverse-CDF lookup.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Matrix {
        let mut cumulative = Vec::with_capacity(self.probs.len());
        let mut acc = 0.0;
        for p in &self.probs {
            acc += p;
            cumulative.push(acc);
        }
        let last = self.probs.len() - 1;
        let mut data = Vec::with_capacity(n * self.dim());
        for _ in 0..n {
            let u: f64 = rng.random::<f64>() * acc;
            let idx = cumulative.partition_point(|c| *c <= u).min(last);
            data.extend_from_slice(self.support.row(idx));
        }
        Matrix::new(n, self.dim(), data).expect("row widths match support")
    }
}

/// Exact population quantities for a pair of discrete distributions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationFunctionals {
    /// `MMD²(P, Q)`
    pub mmd_sq: f64,
    /// `⟨μP − μQ, CP(μP − μQ)⟩`
    pub zeta_x: f64,
    /// `⟨μP − μQ, CQ(μP − μQ)⟩`
    pub zeta_y: f64,
    /// `‖CP‖²_HS`
    pub hs_pp: f64,
    /// `‖CQ‖²_HS`
    pub hs_qq: f64,
    /// `⟨CP, CQ⟩_HS`
    pub hs_pq: f64,
    /// `⟨μP, CP μP⟩`
    pub mu_cp_mu: f64,
    /// `⟨μQ, CQ μQ⟩`
    pub mu_cq_mu: f64,
}

impl PopulationFunctionals {
    /// All functionals zero.
    pub fn zero() -> Self {
        Self {
            mmd_sq: 0.0,
            zeta_x: 0.0,
            zeta_y: 0.0,
            hs_pp: 0.0,
            hs_qq: 0.0,
            hs_pq: 0.0,
            mu_cp_mu: 0.0,
            mu_cq_mu: 0.0,
        }
    }
}

fn weighted_mean(values: &[f64], w: &[f64]) -> f64 {
    let mut acc = CompensatedSum::new();
    for (v, p) in values.iter().zip(w) {
        acc.add(v * p);
    }
    acc.value()
}

fn weighted_variance(values: &[f64], w: &[f64]) -> f64 {
    let m = weighted_mean(values, w);
    let mut acc = CompensatedSum::new();
    for (v, p) in values.iter().zip(w) {
        acc.add(p * (v - m) * (v - m));
    }
    acc.value()
}

fn mat_vec(m: &Matrix, v: &[f64]) -> Vec<f64> {
    m.iter_rows().map(|r| weighted_mean(r, v)).collect()
}

fn check_dims(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<()> {
    if p.dim() != q.dim() {
        return Err(Error::Shape(format!(
            "supports have dimensions {} and {}",
            p.dim(),
            q.dim()
        )));
    }
    Ok(())
}

/// Compute every [`PopulationFunctionals`] entry by finite sums.
pub fn population_functionals(
    p: &DiscreteDistribution,
    q: &DiscreteDistribution,
    spec: &KernelSpec,
) -> Result<PopulationFunctionals> {
    check_dims(p, q)?;
    let kernel = spec.evaluator(p.dim())?;
    let kpp = gram_cross(&kernel, p.support(), p.support());
    let kqq = gram_cross(&kernel, q.support(), q.support());
    let kpq = gram_cross(&kernel, p.support(), q.support());
    let kqp = kpq.transpose();
    let (wp, wq) = (p.probs(), q.probs());

    // Mean embeddings evaluated on each support.
    let mu_p_on_p = mat_vec(&kpp, wp);
    let mu_q_on_p = mat_vec(&kpq, wq);
    let mu_p_on_q = mat_vec(&kqp, wp);
    let mu_q_on_q = mat_vec(&kqq, wq);

    let e_pp = weighted_mean(&mu_p_on_p, wp);
    let e_qq = weighted_mean(&mu_q_on_q, wq);
    let e_pq = weighted_mean(&mu_q_on_p, wp);

    let delta_on_p: Vec<f64> = mu_p_on_p.iter().zip(&mu_q_on_p).map(|(a, b)| a - b).collect();
    let delta_on_q: Vec<f64> = mu_p_on_q.iter().zip(&mu_q_on_q).map(|(a, b)| a - b).collect();

    // ‖μP − μQ‖² = E_P[Δ] − E_Q[Δ]
    let mmd_sq = (weighted_mean(&delta_on_p, wp) - weighted_mean(&delta_on_q, wq)).max(0.0);

    let centered_sq = |k: &Matrix, row_mean: &[f64], col_mean: &[f64], grand: f64, wr: &[f64], wc: &[f64]| {
        let mut acc = CompensatedSum::new();
        for (a, wa) in wr.iter().enumerate() {
            let row = k.row(a);
            for (b, wb) in wc.iter().enumerate() {
                let c = row[b] - row_mean[a] - col_mean[b] + grand;
                acc.add(wa * wb * c * c);
            }
        }
        acc.value()
    };

    Ok(PopulationFunctionals {
        mmd_sq,
        zeta_x: weighted_variance(&delta_on_p, wp),
        zeta_y: weighted_variance(&delta_on_q, wq),
        hs_pp: centered_sq(&kpp, &mu_p_on_p, &mu_p_on_p, e_pp, wp, wp),
        hs_qq: centered_sq(&kqq, &mu_q_on_q, &mu_q_on_q, e_qq, wq, wq),
        hs_pq: centered_sq(&kpq, &mu_q_on_p, &mu_p_on_q, e_pq, wp, wq),
        mu_cp_mu: weighted_variance(&mu_p_on_p, wp),
        mu_cq_mu: weighted_variance(&mu_q_on_q, wq),
    })
}

/// `⟨f, C f⟩ = Var_{X~dist}[f(X)]` for `f = Σ_i w_i k(c_i, ·)`.
pub fn covariance_quadratic_form(
    dist: &DiscreteDistribution,
    spec: &KernelSpec,
    centers: &Matrix,
    weights: &[f64],
) -> Result<f64> {
    if centers.cols() != dist.dim() || centers.rows() != weights.len() {
        return Err(Error::Shape("centers and weights do not match the distribution".into()));
    }
    let kernel = spec.evaluator(dist.dim())?;
    let k = gram_cross(&kernel, dist.support(), centers);
    let f = mat_vec(&k, weights);
    Ok(weighted_variance(&f, dist.probs()))
}

/// Degeneracy class of the paired U-statistic estimator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Degeneracy {
    NonDegenerate,
    FirstOrder,
    InfinitelyDegenerate,
}

/// Classify from the functionals: infinitely degenerate when every covariance
/// functional vanishes, first order when only `ζX` and `ζY` do.
pub fn classify_degeneracy(f: &PopulationFunctionals, tol: f64) -> Degeneracy {
    let covariance = [f.hs_pp, f.hs_qq, f.zeta_x, f.zeta_y, f.mu_cp_mu, f.mu_cq_mu];
    if covariance.iter().all(|v| *v <= tol) {
        Degeneracy::InfinitelyDegenerate
    } else if f.zeta_x <= tol && f.zeta_y <= tol {
        Degeneracy::FirstOrder
    } else {
        Degeneracy::NonDegenerate
    }
}

/// Exact mean and variance of a statistic.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
}

/// Mixed-radix odometer over `digits` positions, each in `0..radix[i]`, keeping
/// prefix products of the per-digit weights.
struct Odometer<'a> {
    radix: Vec<usize>,
    weights: Vec<&'a [f64]>,
    digits: Vec<usize>,
    prefix: Vec<f64>,
    done: bool,
}

impl<'a> Odometer<'a> {
    fn new(weights: Vec<&'a [f64]>) -> Self {
        let radix: Vec<usize> = weights.iter().map(|w| w.len()).collect();
        let n = radix.len();
        let mut od = Self {
            radix,
            weights,
            digits: vec![0; n],
            prefix: vec![1.0; n + 1],
            done: false,
        };
        od.refresh_from(0);
        od
    }

    fn refresh_from(&mut self, start: usize) {
        for i in start..self.digits.len() {
            self.prefix[i + 1] = self.prefix[i] * self.weights[i][self.digits[i]];
        }
    }

    fn weight(&self) -> f64 {
        self.prefix[self.digits.len()]
    }

    fn advance(&mut self) {
        let mut i = self.digits.len();
        loop {
            if i == 0 {
                self.done = true;
                return;
            }
            i -= 1;
            self.digits[i] += 1;
            if self.digits[i] < self.radix[i] {
                self.refresh_from(i);
                return;
            }
            self.digits[i] = 0;
        }
    }
}

fn tuple_count(radix: impl IntoIterator<Item = (usize, usize)>) -> f64 {
    radix
        .into_iter()
        .map(|(base, power)| libm::pow(base as f64, power as f64))
        .product()
}

/// Enumerate every weighted tuple, calling `stat(digits)`, and return the
/// exact mean and two-pass variance.
fn enumerate_moments<F>(weights: Vec<&[f64]>, mut stat: F) -> Moments
where
    F: FnMut(&[usize]) -> f64,
{
    let mut mean_acc = CompensatedSum::new();
    let mut od = Odometer::new(weights.clone());
    while !od.done {
        mean_acc.add(od.weight() * stat(&od.digits));
        od.advance();
    }
    let mean = mean_acc.value();
    let mut var_acc = CompensatedSum::new();
    let mut od = Odometer::new(weights);
    while !od.done {
        let d = stat(&od.digits) - mean;
        var_acc.add(od.weight() * d * d);
        od.advance();
    }
    Moments {
        mean,
        variance: var_acc.value(),
    }
}

fn check_cap(requested: f64, cap: u64) -> Result<()> {
    if requested > cap as f64 {
        return Err(Error::TooLarge { requested, cap });
    }
    Ok(())
}

/// Exact moments of an MMD estimator at sizes `(nx, ny)`, by enumerating all
/// `|supp P|^nx · |supp Q|^ny` sample tuples. Uses [`DEFAULT_ENUMERATION_CAP`].
pub fn brute_force_moments(
    p: &DiscreteDistribution,
    q: &DiscreteDistribution,
    spec: &KernelSpec,
    nx: usize,
    ny: usize,
    kind: EstimatorKind,
) -> Result<Moments> {
    brute_force_moments_with_cap(p, q, spec, nx, ny, kind, DEFAULT_ENUMERATION_CAP)
}

pub fn brute_force_moments_with_cap(
    p: &DiscreteDistribution,
    q: &DiscreteDistribution,
    spec: &KernelSpec,
    nx: usize,
    ny: usize,
    kind: EstimatorKind,
    cap: u64,
) -> Result<Moments> {
    check_dims(p, q)?;
    if nx < 2 || ny < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            got: nx.min(ny),
        });
    }
    if kind == EstimatorKind::Ustat && nx != ny {
        return Err(Error::Pairing { nx, ny });
    }
    check_cap(tuple_count([(p.len(), nx), (q.len(), ny)]), cap)?;

    let kernel = spec.evaluator(p.dim())?;
    let kpp = gram_cross(&kernel, p.support(), p.support());
    let kqq = gram_cross(&kernel, q.support(), q.support());
    let kpq = gram_cross(&kernel, p.support(), q.support());

    let mut weights: Vec<&[f64]> = Vec::with_capacity(nx + ny);
    weights.extend(core::iter::repeat_n(p.probs(), nx));
    weights.extend(core::iter::repeat_n(q.probs(), ny));

    let mut kxx = Matrix::zeros(nx, nx);
    let mut kyy = Matrix::zeros(ny, ny);
    let mut kxy = Matrix::zeros(nx, ny);
    let stat = |digits: &[usize]| {
        let (ix, iy) = digits.split_at(nx);
        for (i, &a) in ix.iter().enumerate() {
            for (j, &b) in ix.iter().enumerate() {
                kxx.set(i, j, kpp.get(a, b));
            }
            for (j, &b) in iy.iter().enumerate() {
                kxy.set(i, j, kpq.get(a, b));
            }
        }
        for (i, &a) in iy.iter().enumerate() {
            for (j, &b) in iy.iter().enumerate() {
                kyy.set(i, j, kqq.get(a, b));
            }
        }
        let blocks = GramBlocks::from_parts(kxx.clone(), kyy.clone(), kxy.clone())
            .expect("blocks assembled from symmetric support grams");
        estimators::estimate(&blocks, kind)
            .expect("sizes validated above")
            .value
    };
    Ok(enumerate_moments(weights, stat))
}

fn gen_u_inputs<'a>(spec: &GenUSpec, dists: &'a [DiscreteDistribution]) -> Result<Vec<&'a Matrix>> {
    if dists.len() != spec.groups() {
        return Err(Error::Shape(format!(
            "{} distributions for a {}-sample statistic",
            dists.len(),
            spec.groups()
        )));
    }
    Ok(dists.iter().map(|d| d.support()).collect())
}

/// Exact moments of a generalized U-statistic with group sizes `sizes`,
/// enumerating all sample tuples. The statistic is evaluated by
/// [`crate::genustat::gen_u_evaluate`].
pub fn brute_force_gen_u_moments(
    spec: &GenUSpec,
    dists: &[DiscreteDistribution],
    sizes: &[usize],
    cap: u64,
) -> Result<Moments> {
    let supports = gen_u_inputs(spec, dists)?;
    if sizes.len() != spec.groups() {
        return Err(Error::Shape("one size per group required".into()));
    }
    for (j, (&n, &m)) in sizes.iter().zip(spec.arity()).enumerate() {
        if n < m {
            return Err(Error::InsufficientSamples { needed: m, got: n });
        }
        let _ = j;
    }
    let per_sample = crate::genustat::injection_count(spec.arity(), sizes);
    let tuples = tuple_count(dists.iter().zip(sizes).map(|(d, &n)| (d.len(), n)));
    check_cap(tuples * per_sample, cap)?;

    let mut weights: Vec<&[f64]> = Vec::new();
    for (d, &n) in dists.iter().zip(sizes) {
        weights.extend(core::iter::repeat_n(d.probs(), n));
    }
    let mut groups: Vec<Matrix> = supports
        .iter()
        .zip(sizes)
        .map(|(s, &n)| Matrix::zeros(n, s.cols()))
        .collect();
    let stat = |digits: &[usize]| {
        let mut offset = 0;
        for (g, (s, &n)) in groups.iter_mut().zip(supports.iter().zip(sizes)) {
            for i in 0..n {
                g.row_mut(i).copy_from_slice(s.row(digits[offset + i]));
            }
            offset += n;
        }
        crate::genustat::gen_u_evaluate_with_cap(spec, &groups, u64::MAX)
            .expect("sizes validated above")
    };
    Ok(enumerate_moments(weights, stat))
}

/// ζ table of a generalized U-statistic kernel by exhaustive conditioning:
/// `ζ_d = Var(E[h(X) | first d_j arguments of each group j])`.
pub fn enumerate_zeta_table(spec: &GenUSpec, dists: &[DiscreteDistribution]) -> Result<ZetaTable> {
    let supports = gen_u_inputs(spec, dists)?;
    let arity = spec.arity().to_vec();
    let total_args: usize = arity.iter().sum();

    // Per-argument weights and supports, group by group.
    let mut weights: Vec<&[f64]> = Vec::with_capacity(total_args);
    let mut arg_support: Vec<&Matrix> = Vec::with_capacity(total_args);
    for ((d, s), &m) in dists.iter().zip(&supports).zip(&arity) {
        for _ in 0..m {
            weights.push(d.probs());
            arg_support.push(s);
        }
    }
    check_cap(
        tuple_count(weights.iter().map(|w| (w.len(), 1))),
        DEFAULT_ENUMERATION_CAP,
    )?;

    // h on every full argument tuple, in odometer order.
    let mut h_values = Vec::new();
    let mut h_weights = Vec::new();
    let mut args: Vec<&[f64]> = Vec::with_capacity(total_args);
    let mut od = Odometer::new(weights.clone());
    while !od.done {
        args.clear();
        for (i, &digit) in od.digits.iter().enumerate() {
            args.push(arg_support[i].row(digit));
        }
        h_values.push(spec.eval(&args));
        h_weights.push(od.weight());
        od.advance();
    }
    let radix: Vec<usize> = weights.iter().map(|w| w.len()).collect();

    let mut table = ZetaTable::new(arity.clone());
    for depth in ZetaTable::index_set(&arity) {
        // Mark conditioned argument positions: the first d_j of each group.
        let mut conditioned = vec![false; total_args];
        let mut offset = 0;
        for (&d, &m) in depth.iter().zip(&arity) {
            for c in conditioned.iter_mut().skip(offset).take(d) {
                *c = true;
            }
            offset += m;
        }
        // Conditional mean keyed by the conditioned digits (mixed radix).
        let key_radix: Vec<usize> = radix
            .iter()
            .zip(&conditioned)
            .filter(|(_, c)| **c)
            .map(|(r, _)| *r)
            .collect();
        let key_count: usize = key_radix.iter().product();
        let mut cond_sum = vec![CompensatedSum::new(); key_count];
        let mut cond_weight = vec![CompensatedSum::new(); key_count];
        let mut digits = vec![0usize; total_args];
        for (h, w) in h_values.iter().zip(&h_weights) {
            let key = key_of(&digits, &conditioned, &radix);
            cond_sum[key].add(w * h);
            cond_weight[key].add(*w);
            increment(&mut digits, &radix);
        }
        let cond: Vec<(f64, f64)> = cond_sum
            .iter()
            .zip(&cond_weight)
            .map(|(s, w)| {
                let w = w.value();
                (if w > 0.0 { s.value() / w } else { 0.0 }, w)
            })
            .collect();
        let mean = crate::numeric::compensated_sum(cond.iter().map(|(m, w)| m * w));
        let var = crate::numeric::compensated_sum(cond.iter().map(|(m, w)| w * (m - mean) * (m - mean)));
        table.insert(depth, var)?;
    }
    Ok(table)
}

fn key_of(digits: &[usize], conditioned: &[bool], radix: &[usize]) -> usize {
    let mut key = 0;
    for ((d, c), r) in digits.iter().zip(conditioned).zip(radix) {
        if *c {
            key = key * r + d;
        }
    }
    key
}

fn increment(digits: &mut [usize], radix: &[usize]) {
    for i in (0..digits.len()).rev() {
        digits[i] += 1;
        if digits[i] < radix[i] {
            return;
        }
        digits[i] = 0;
    }
}

/// Exact mean of `h` under the product distribution.
pub fn kernel_mean(spec: &GenUSpec, dists: &[DiscreteDistribution]) -> Result<f64> {
    let supports = gen_u_inputs(spec, dists)?;
    let mut weights: Vec<&[f64]> = Vec::new();
    let mut arg_support: Vec<&Matrix> = Vec::new();
    for ((d, s), &m) in dists.iter().zip(&supports).zip(spec.arity()) {
        for _ in 0..m {
            weights.push(d.probs());
            arg_support.push(s);
        }
    }
    let mut acc = CompensatedSum::new();
    let mut args: Vec<&[f64]> = Vec::new();
    let mut od = Odometer::new(weights);
    while !od.done {
        args.clear();
        for (i, &digit) in od.digits.iter().enumerate() {
            args.push(arg_support[i].row(digit));
        }
        acc.add(od.weight() * spec.eval(&args));
        od.advance();
    }
    Ok(acc.value())
}

/// Kernel matrix between support points of one distribution, for fixtures.
pub fn support_gram(dist: &DiscreteDistribution, kernel: &Kernel) -> Matrix {
    gram_cross(kernel, dist.support(), dist.support())
}

/// Human-readable name of an estimator kind, used in reports.
pub fn kind_label(kind: EstimatorKind) -> alloc::string::String {
    match kind {
        EstimatorKind::Unbiased => "unbiased".to_string(),
        EstimatorKind::Ustat => "ustat".to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::variance::{mmd_unbiased_variance, mmd_ustat_variance};

    fn triangle_pair() -> (DiscreteDistribution, DiscreteDistribution) {
        (
            DiscreteDistribution::uniform_1d(&[1.0, 2.0]).unwrap(),
            DiscreteDistribution::uniform_1d(&[3.0, 4.0]).unwrap(),
        )
    }

    fn linear_pair() -> (DiscreteDistribution, DiscreteDistribution) {
        (
            DiscreteDistribution::uniform_1d(&[-1.0, 1.0]).unwrap(),
            DiscreteDistribution::uniform_1d(&[0.0, 2.0]).unwrap(),
        )
    }

    fn skewed_pair() -> (DiscreteDistribution, DiscreteDistribution) {
        (
            DiscreteDistribution::new(Matrix::column(&[0.0, 0.7, 1.9]), vec![0.2, 0.5, 0.3]).unwrap(),
            DiscreteDistribution::new(Matrix::column(&[0.4, 1.1]), vec![0.65, 0.35]).unwrap(),
        )
    }

    #[test]
    fn distribution_validation() {
        let m = Matrix::column(&[0.0, 1.0]);
        assert!(DiscreteDistribution::new(m.clone(), vec![0.5, 0.6]).is_err());
        assert!(DiscreteDistribution::new(m.clone(), vec![-0.5, 1.5]).is_err());
        assert!(DiscreteDistribution::new(m, vec![1.0]).is_err());
        assert!(DiscreteDistribution::new(Matrix::column(&[1.0, 1.0]), vec![0.5, 0.5]).is_err());
        let d: DiscreteDistribution =
            serde_json::from_str(r#"{"support": [[0.0], [2.0]], "probs": [0.25, 0.75]}"#).unwrap();
        assert_eq!(d.probs(), &[0.25, 0.75]);
        assert!(serde_json::from_str::<DiscreteDistribution>(
            r#"{"support": [[0.0], [2.0]], "probs": [0.25, 0.5]}"#
        )
        .is_err());
    }

    #[test]
    fn equal_distributions_have_zero_discrepancy() {
        let (p, _) = skewed_pair();
        for spec in [KernelSpec::gaussian(0.8).unwrap(), KernelSpec::linear(), KernelSpec::triangle()] {
            let f = population_functionals(&p, &p, &spec).unwrap();
            assert!(f.mmd_sq.abs() < 1e-15);
            assert!(f.zeta_x.abs() < 1e-15 && f.zeta_y.abs() < 1e-15);
            assert!(f.hs_pp > 0.0);
        }
    }

    #[test]
    fn triangle_counterexample() {
        let (p, q) = triangle_pair();
        let spec = KernelSpec::triangle();
        let form = covariance_quadratic_form(&p, &spec, &Matrix::column(&[1.0]), &[1.0]).unwrap();
        assert!((form - 0.25).abs() < 1e-15);
        let f = population_functionals(&p, &q, &spec).unwrap();
        assert_eq!(f.zeta_x, 0.0);
        assert_eq!(f.zeta_y, 0.0);
        assert!(f.mmd_sq > 0.0);
        assert_eq!(classify_degeneracy(&f, DEFAULT_DEGENERACY_TOL), Degeneracy::FirstOrder);
    }

    #[test]
    fn degeneracy_classes() {
        let a = DiscreteDistribution::point_mass(&[0.0]).unwrap();
        let b = DiscreteDistribution::point_mass(&[1.5]).unwrap();
        for spec in [KernelSpec::gaussian(1.0).unwrap(), KernelSpec::linear(), KernelSpec::triangle()] {
            let f = population_functionals(&a, &b, &spec).unwrap();
            assert_eq!(
                classify_degeneracy(&f, DEFAULT_DEGENERACY_TOL),
                Degeneracy::InfinitelyDegenerate
            );
        }
        let (p, q) = linear_pair();
        let f = population_functionals(&p, &q, &KernelSpec::linear()).unwrap();
        // Δ(x) = (E_P X − E_Q X) x = −x; ζX = Var_P(X) = 1, ζY = Var_Q(Y) = 1.
        assert!((f.zeta_x - 1.0).abs() < 1e-15);
        assert!((f.zeta_y - 1.0).abs() < 1e-15);
        assert!((f.mmd_sq - 1.0).abs() < 1e-15);
        assert_eq!(classify_degeneracy(&f, DEFAULT_DEGENERACY_TOL), Degeneracy::NonDegenerate);
    }

    #[test]
    fn null_with_nonconstant_kernel_is_first_order() {
        let (p, _) = skewed_pair();
        for spec in [KernelSpec::gaussian(0.5).unwrap(), KernelSpec::linear(), KernelSpec::triangle()] {
            let f = population_functionals(&p, &p, &spec).unwrap();
            assert_eq!(classify_degeneracy(&f, DEFAULT_DEGENERACY_TOL), Degeneracy::FirstOrder);
        }
    }

    #[test]
    fn functional_invariants() {
        let (p, q) = skewed_pair();
        for spec in [KernelSpec::gaussian(0.6).unwrap(), KernelSpec::linear(), KernelSpec::triangle()] {
            let f = population_functionals(&p, &q, &spec).unwrap();
            for v in [f.mmd_sq, f.zeta_x, f.zeta_y, f.hs_pp, f.hs_qq, f.mu_cp_mu, f.mu_cq_mu] {
                assert!(v >= 0.0);
            }
            assert!(f.hs_pq.abs() <= (f.hs_pp * f.hs_qq).sqrt() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn enumerated_mean_is_mmd() {
        let (p, q) = skewed_pair();
        for spec in [KernelSpec::gaussian(0.6).unwrap(), KernelSpec::linear(), KernelSpec::triangle()] {
            let f = population_functionals(&p, &q, &spec).unwrap();
            for (nx, ny) in [(2, 2), (3, 2), (2, 4)] {
                let m = brute_force_moments(&p, &q, &spec, nx, ny, EstimatorKind::Unbiased).unwrap();
                assert!((m.mean - f.mmd_sq).abs() < 1e-10, "{} vs {}", m.mean, f.mmd_sq);
            }
            let m = brute_force_moments(&p, &q, &spec, 3, 3, EstimatorKind::Ustat).unwrap();
            assert!((m.mean - f.mmd_sq).abs() < 1e-10);
        }
    }

    #[test]
    fn triangle_ustat_variance_is_one_over_n_n_minus_one() {
        let (p, q) = triangle_pair();
        for n in 2..=4usize {
            let m = brute_force_moments(&p, &q, &KernelSpec::triangle(), n, n, EstimatorKind::Ustat)
                .unwrap();
            let expected = 1.0 / (n * (n - 1)) as f64;
            assert!((m.variance - expected).abs() <= 1e-12, "n={n}: {}", m.variance);
        }
    }

    #[test]
    fn linear_example_matches_closed_form() {
        let (p, q) = linear_pair();
        let spec = KernelSpec::linear();
        let m = brute_force_moments(&p, &q, &spec, 3, 2, EstimatorKind::Unbiased).unwrap();
        let f = population_functionals(&p, &q, &spec).unwrap();
        let closed = mmd_unbiased_variance(&f, 3, 2).unwrap().total;
        assert!((m.variance - closed).abs() <= 1e-10 * closed);
    }

    #[test]
    fn ustat_variance_matches_enumeration() {
        let (p, q) = skewed_pair();
        for spec in [KernelSpec::gaussian(0.6).unwrap(), KernelSpec::linear(), KernelSpec::triangle()] {
            let f = population_functionals(&p, &q, &spec).unwrap();
            for n in 2..=4 {
                let m = brute_force_moments(&p, &q, &spec, n, n, EstimatorKind::Ustat).unwrap();
                let closed = mmd_ustat_variance(&f, n).unwrap();
                assert!((m.variance - closed).abs() <= 1e-10 * closed, "n={n}");
            }
        }
    }

    #[test]
    fn enumeration_cap_is_enforced() {
        let (p, q) = skewed_pair();
        let err = brute_force_moments_with_cap(
            &p,
            &q,
            &KernelSpec::linear(),
            4,
            4,
            EstimatorKind::Unbiased,
            1000,
        )
        .unwrap_err();
        assert!(matches!(err, Error::TooLarge { .. }));
        let big = DiscreteDistribution::uniform_1d(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0])
            .unwrap();
        assert!(matches!(
            brute_force_moments(&big, &big, &KernelSpec::linear(), 4, 4, EstimatorKind::Unbiased),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn sampling_follows_probabilities() {
        let (p, _) = skewed_pair();
        let draws = p.sample(100_000, &mut crate::rng::stream_rng(1, &[]));
        let frac = draws.as_slice().iter().filter(|v| **v == 0.7).count() as f64 / 100_000.0;
        assert!((frac - 0.5).abs() < 0.01);
    }
}
