//! Multi-sample generalized U-statistics.
//!
//! A kernel `h` takes `m_j` arguments from each of `c` sample groups and is
//! symmetric within each block. The statistic averages `h` over all choices of
//! `m_j`-subsets from each group. Averaging over ordered injections instead
//! counts every subset `Π m_j!` times, which cancels, so only unordered subsets
//! are visited.
//!
//! [`gen_u_evaluate`] is a direct reference implementation with cost
//! `Π C(n_j, m_j)`; the estimators module has the fast MMD path.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::matrix::Matrix;
use crate::numeric::{binomial, compensated_sum, CompensatedSum};
use crate::oracle::PopulationFunctionals;

/// Default cap on `h` evaluations in [`gen_u_evaluate`].
pub const DEFAULT_EVALUATION_CAP: u64 = 10_000_000;

type BlockKernel = dyn Fn(&[&[f64]]) -> f64 + Send + Sync;

/// A block-symmetric kernel with `arity[j]` arguments from group `j`.
///
/// `h` receives the arguments group by group, each as a feature row. It must
/// be safe to call concurrently.
pub struct GenUSpec {
    arity: Vec<usize>,
    h: Box<BlockKernel>,
}

impl core::fmt::Debug for GenUSpec {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("GenUSpec").field("arity", &self.arity).finish_non_exhaustive()
    }
}

impl GenUSpec {
    pub fn new<F>(arity: Vec<usize>, h: F) -> Result<Self>
    where
        F: Fn(&[&[f64]]) -> f64 + Send + Sync + 'static,
    {
        if arity.is_empty() || arity.iter().any(|m| *m == 0) {
            return Err(Error::Parameter("every group needs at least one argument".into()));
        }
        Ok(Self {
            arity,
            h: Box::new(h),
        })
    }

    pub fn groups(&self) -> usize {
        self.arity.len()
    }

    pub fn arity(&self) -> &[usize] {
        &self.arity
    }

    pub fn total_arity(&self) -> usize {
        self.arity.iter().sum()
    }

    #[inline]
    pub fn eval(&self, args: &[&[f64]]) -> f64 {
        (self.h)(args)
    }
}

/// The two-sample MMD kernel of arity `(2, 2)`:
/// `k(x1,x2) + k(y1,y2) − ½[k(x1,y1) + k(x1,y2) + k(x2,y1) + k(x2,y2)]`.
pub fn mmd_gen_u_spec(kernel: Kernel) -> GenUSpec {
    GenUSpec::new(vec![2, 2], move |a: &[&[f64]]| {
        let (x1, x2, y1, y2) = (a[0], a[1], a[2], a[3]);
        kernel.eval(x1, x2) + kernel.eval(y1, y2)
            - 0.5
                * (kernel.eval(x1, y1)
                    + kernel.eval(x1, y2)
                    + kernel.eval(x2, y1)
                    + kernel.eval(x2, y2))
    })
    .expect("arity is positive")
}

/// Number of `h` evaluations one statistic needs: `Π C(n_j, m_j)`.
pub fn injection_count(arity: &[usize], sizes: &[usize]) -> f64 {
    arity
        .iter()
        .zip(sizes)
        .map(|(&m, &n)| binomial(n, m) as f64)
        .product()
}

/// Advance `idx` to the next `k`-combination of `0..n` in lexicographic order.
fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if idx[i] < n - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn validate_groups(spec: &GenUSpec, groups: &[Matrix]) -> Result<()> {
    if groups.len() != spec.groups() {
        return Err(Error::Shape(format!(
            "{} groups for a {}-group kernel",
            groups.len(),
            spec.groups()
        )));
    }
    for (g, &m) in groups.iter().zip(spec.arity()) {
        if g.rows() < m {
            return Err(Error::InsufficientSamples {
                needed: m,
                got: g.rows(),
            });
        }
    }
    Ok(())
}

/// The generalized U-statistic on `groups`, with the default evaluation cap.
pub fn gen_u_evaluate(spec: &GenUSpec, groups: &[Matrix]) -> Result<f64> {
    gen_u_evaluate_with_cap(spec, groups, DEFAULT_EVALUATION_CAP)
}

pub fn gen_u_evaluate_with_cap(spec: &GenUSpec, groups: &[Matrix], cap: u64) -> Result<f64> {
    validate_groups(spec, groups)?;
    let sizes: Vec<usize> = groups.iter().map(|g| g.rows()).collect();
    let count = injection_count(spec.arity(), &sizes);
    if count > cap as f64 {
        return Err(Error::TooLarge {
            requested: count,
            cap,
        });
    }
    let mut combos: Vec<Vec<usize>> = spec.arity().iter().map(|&m| (0..m).collect()).collect();
    let mut args: Vec<&[f64]> = Vec::with_capacity(spec.total_arity());
    let mut acc = CompensatedSum::new();
    'outer: loop {
        args.clear();
        for (g, c) in groups.iter().zip(&combos) {
            args.extend(c.iter().map(|&i| g.row(i)));
        }
        acc.add(spec.eval(&args));
        // Odometer over groups, last group fastest.
        let mut j = combos.len();
        loop {
            if j == 0 {
                break 'outer;
            }
            j -= 1;
            if next_combination(&mut combos[j], sizes[j]) {
                break;
            }
            for (i, v) in combos[j].iter_mut().enumerate() {
                *v = i;
            }
        }
    }
    Ok(acc.value() / count)
}

/// `ζ_d` indexed by `d = (d_1, …, d_c)` with `0 ≤ d_j ≤ m_j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZetaTable {
    arity: Vec<usize>,
    values: BTreeMap<Vec<usize>, f64>,
}

impl ZetaTable {
    pub fn new(arity: Vec<usize>) -> Self {
        Self {
            arity,
            values: BTreeMap::new(),
        }
    }

    /// All depth tuples for the given arity, in lexicographic order.
    pub fn index_set(arity: &[usize]) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut d = vec![0usize; arity.len()];
        loop {
            out.push(d.clone());
            let mut j = d.len();
            loop {
                if j == 0 {
                    return out;
                }
                j -= 1;
                if d[j] < arity[j] {
                    d[j] += 1;
                    break;
                }
                d[j] = 0;
            }
        }
    }

    pub fn arity(&self) -> &[usize] {
        &self.arity
    }

    pub fn insert(&mut self, depth: Vec<usize>, value: f64) -> Result<()> {
        if depth.len() != self.arity.len() || depth.iter().zip(&self.arity).any(|(d, m)| d > m) {
            return Err(Error::Shape(format!(
                "depth {depth:?} outside arity {:?}",
                self.arity
            )));
        }
        self.values.insert(depth, value);
        Ok(())
    }

    pub fn get(&self, depth: &[usize]) -> Option<f64> {
        self.values.get(depth).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vec<usize>, f64)> {
        self.values.iter().map(|(k, v)| (k, *v))
    }

    /// First missing entry, if any.
    pub fn missing(&self) -> Option<Vec<usize>> {
        Self::index_set(&self.arity)
            .into_iter()
            .find(|d| !self.values.contains_key(d))
    }
}

/// Sen coefficient `Π_j C(m_j,d_j)·C(n_j−m_j, m_j−d_j) / C(n_j, m_j)`.
pub fn sen_coefficient(arity: &[usize], depth: &[usize], sizes: &[usize]) -> f64 {
    arity
        .iter()
        .zip(depth)
        .zip(sizes)
        .map(|((&m, &d), &n)| {
            let num = binomial(m, d) * binomial(n - m, m - d);
            num as f64 / binomial(n, m) as f64
        })
        .product()
}

/// Variance of the generalized U-statistic at group sizes `sizes`:
/// `Σ_d sen_coefficient(d)·ζ_d`.
pub fn sen_variance(zetas: &ZetaTable, sizes: &[usize]) -> Result<f64> {
    let arity = zetas.arity();
    if sizes.len() != arity.len() {
        return Err(Error::Shape("one size per group required".into()));
    }
    for (&n, &m) in sizes.iter().zip(arity) {
        if n < m {
            return Err(Error::InsufficientSamples { needed: m, got: n });
        }
    }
    if let Some(d) = zetas.missing() {
        return Err(Error::IncompleteTable(d));
    }
    Ok(compensated_sum(
        zetas
            .iter()
            .map(|(d, z)| sen_coefficient(arity, d, sizes) * z),
    ))
}

/// Order of degeneracy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegeneracyOrder {
    Finite(usize),
    Infinite,
}

/// Largest `r` such that every `ζ_d` with `Σ d_j ≤ r` is at most `tol`.
pub fn degeneracy_order(zetas: &ZetaTable, tol: f64) -> DegeneracyOrder {
    let max_depth: usize = zetas.arity().iter().sum();
    let mut r = 0;
    for depth in 1..=max_depth {
        let vanishes = zetas
            .iter()
            .filter(|(d, _)| d.iter().sum::<usize>() == depth)
            .all(|(_, z)| z <= tol);
        if !vanishes {
            return DegeneracyOrder::Finite(r);
        }
        r = depth;
    }
    DegeneracyOrder::Infinite
}

/// ζ table of [`mmd_gen_u_spec`] in terms of the population functionals.
pub fn mmd_zeta_table(f: &PopulationFunctionals) -> ZetaTable {
    let (zx, zy) = (f.zeta_x, f.zeta_y);
    let entries = [
        ([0, 0], 0.0),
        ([1, 0], zx),
        ([0, 1], zy),
        ([2, 0], f.hs_pp + 2.0 * zx),
        ([0, 2], f.hs_qq + 2.0 * zy),
        ([1, 1], 0.25 * f.hs_pq + zx + zy),
        ([2, 1], f.hs_pp + 0.5 * f.hs_pq + 2.0 * zx + zy),
        ([1, 2], f.hs_qq + 0.5 * f.hs_pq + zx + 2.0 * zy),
        ([2, 2], f.hs_pp + f.hs_qq + f.hs_pq + 2.0 * zx + 2.0 * zy),
    ];
    let mut table = ZetaTable::new(vec![2, 2]);
    for (d, v) in entries {
        table.insert(d.to_vec(), v).expect("depth within arity");
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::mmd_unbiased;
    use crate::kernels::{gram_blocks, KernelSpec};
    use crate::oracle::{
        brute_force_gen_u_moments, enumerate_zeta_table, kernel_mean, population_functionals,
        DiscreteDistribution,
    };
    use crate::variance::mmd_unbiased_variance;
    use crate::SampleSet;
    use rand::Rng;

    fn square_diff() -> GenUSpec {
        GenUSpec::new(vec![2], |a: &[&[f64]]| (a[0][0] - a[1][0]).powi(2)).unwrap()
    }

    /// Arity (2, 1): h(x1, x2; y) = x1·x2·y + x1 + x2.
    fn mixed() -> GenUSpec {
        GenUSpec::new(vec![2, 1], |a: &[&[f64]]| a[0][0] * a[1][0] * a[2][0] + a[0][0] + a[1][0])
            .unwrap()
    }

    #[test]
    fn hand_values() {
        let g = [Matrix::column(&[0.0, 1.0, 2.0])];
        assert!((gen_u_evaluate(&square_diff(), &g).unwrap() - 2.0).abs() < 1e-15);
        let constant =
            GenUSpec::new(vec![2], |a: &[&[f64]]| a[0][0] * a[1][0] - 1.0).unwrap();
        assert_eq!(gen_u_evaluate(&constant, &[Matrix::column(&[1.0, 1.0, 1.0])]).unwrap(), 0.0);
    }

    #[test]
    fn errors() {
        let spec = square_diff();
        assert!(matches!(
            gen_u_evaluate(&spec, &[Matrix::column(&[1.0])]),
            Err(Error::InsufficientSamples { needed: 2, got: 1 })
        ));
        let big = Matrix::column(&(0..200).map(f64::from).collect::<Vec<_>>());
        assert!(matches!(
            gen_u_evaluate_with_cap(&spec, &[big], 100),
            Err(Error::TooLarge { .. })
        ));
        let table = ZetaTable::new(vec![2]);
        assert_eq!(sen_variance(&table, &[4]), Err(Error::IncompleteTable(vec![0])));
    }

    #[test]
    fn mmd_kernel_reproduces_unbiased_estimator() {
        let mut rng = crate::rng::stream_rng(3, &[]);
        for spec in [KernelSpec::gaussian(0.8).unwrap(), KernelSpec::linear(), KernelSpec::triangle()] {
            for (nx, ny) in [(3, 3), (2, 5), (6, 4)] {
                let x = Matrix::column(&(0..nx).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<_>>());
                let y = Matrix::column(&(0..ny).map(|_| rng.random_range(-1.0..2.0)).collect::<Vec<_>>());
                let s = SampleSet::new(x.clone(), y.clone()).unwrap();
                let fast = mmd_unbiased(&gram_blocks(&spec, &s).unwrap()).unwrap().value;
                let naive = gen_u_evaluate(&mmd_gen_u_spec(spec.evaluator(1).unwrap()), &[x, y]).unwrap();
                assert!((fast - naive).abs() < 1e-12, "{fast} vs {naive}");
            }
        }
    }

    #[test]
    fn block_symmetry_of_mmd_kernel() {
        let spec = mmd_gen_u_spec(KernelSpec::gaussian(1.3).unwrap().evaluator(2).unwrap());
        let mut rng = crate::rng::stream_rng(4, &[]);
        for _ in 0..50 {
            let pts: Vec<[f64; 2]> = (0..4).map(|_| [rng.random(), rng.random()]).collect();
            let base = spec.eval(&[&pts[0], &pts[1], &pts[2], &pts[3]]);
            let swapped = spec.eval(&[&pts[1], &pts[0], &pts[3], &pts[2]]);
            assert!((base - swapped).abs() < 1e-15);
        }
    }

    #[test]
    fn sen_coefficients_recover_one_sample_formula() {
        for n in 2..20 {
            let c = sen_coefficient(&[2], &[1], &[n]);
            let nf = n as f64;
            assert!((c - 4.0 * (nf - 2.0) / (nf * (nf - 1.0))).abs() < 1e-15);
            let c2 = sen_coefficient(&[2], &[2], &[n]);
            assert!((c2 - 2.0 / (nf * (nf - 1.0))).abs() < 1e-15);
        }
        let mut zero = ZetaTable::new(vec![2, 1]);
        for d in ZetaTable::index_set(&[2, 1]) {
            zero.insert(d, 0.0).unwrap();
        }
        assert_eq!(sen_variance(&zero, &[3, 3]).unwrap(), 0.0);
    }

    #[test]
    fn sen_variance_matches_enumeration() {
        let p = DiscreteDistribution::new(Matrix::column(&[-1.0, 0.5, 2.0]), vec![0.2, 0.5, 0.3]).unwrap();
        let q = DiscreteDistribution::new(Matrix::column(&[0.0, 1.0]), vec![0.6, 0.4]).unwrap();
        let cases: [(GenUSpec, Vec<DiscreteDistribution>, Vec<Vec<usize>>); 2] = [
            (square_diff(), vec![p.clone()], vec![vec![2], vec![3], vec![4]]),
            (mixed(), vec![p.clone(), q.clone()], vec![vec![2, 1], vec![3, 2], vec![4, 3]]),
        ];
        for (spec, dists, sizes) in cases {
            let table = enumerate_zeta_table(&spec, &dists).unwrap();
            assert_eq!(table.get(&vec![0; spec.groups()]), Some(0.0));
            let mean = kernel_mean(&spec, &dists).unwrap();
            for s in sizes {
                let m = brute_force_gen_u_moments(&spec, &dists, &s, 10_000_000).unwrap();
                let v = sen_variance(&table, &s).unwrap();
                assert!((m.variance - v).abs() <= 1e-10 * m.variance.max(1e-300), "{s:?}");
                assert!((m.mean - mean).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mmd_table_agrees_with_conditioning_and_closed_form() {
        let p = DiscreteDistribution::new(Matrix::column(&[-0.5, 0.3, 1.1]), vec![0.3, 0.3, 0.4]).unwrap();
        let q = DiscreteDistribution::new(Matrix::column(&[0.0, 1.5]), vec![0.45, 0.55]).unwrap();
        for spec in [KernelSpec::gaussian(0.6).unwrap(), KernelSpec::linear(), KernelSpec::triangle()] {
            let f = population_functionals(&p, &q, &spec).unwrap();
            let closed = mmd_zeta_table(&f);
            let gspec = mmd_gen_u_spec(spec.evaluator(1).unwrap());
            let enumerated = enumerate_zeta_table(&gspec, &[p.clone(), q.clone()]).unwrap();
            for (d, z) in enumerated.iter() {
                let c = closed.get(d).unwrap();
                assert!((z - c).abs() <= 1e-12 * (1.0 + z.abs()), "{d:?}: {z} vs {c}");
            }
            for (nx, ny) in [(2, 2), (3, 4), (7, 3)] {
                let sen = sen_variance(&closed, &[nx, ny]).unwrap();
                let total = mmd_unbiased_variance(&f, nx, ny).unwrap().total;
                assert!((sen - total).abs() <= 1e-12 * total);
            }
        }
    }

    #[test]
    fn degeneracy_orders() {
        let p = DiscreteDistribution::new(Matrix::column(&[-0.5, 0.3, 1.1]), vec![0.3, 0.3, 0.4]).unwrap();
        let q = DiscreteDistribution::uniform_1d(&[0.0, 1.5]).unwrap();
        let spec = KernelSpec::gaussian(1.0).unwrap();
        let null = population_functionals(&p, &p, &spec).unwrap();
        assert_eq!(degeneracy_order(&mmd_zeta_table(&null), 1e-10), DegeneracyOrder::Finite(1));
        let alt = population_functionals(&p, &q, &spec).unwrap();
        assert_eq!(degeneracy_order(&mmd_zeta_table(&alt), 1e-10), DegeneracyOrder::Finite(0));
        let zero = mmd_zeta_table(&PopulationFunctionals::zero());
        assert_eq!(degeneracy_order(&zero, 1e-10), DegeneracyOrder::Infinite);

        let tri = population_functionals(
            &DiscreteDistribution::uniform_1d(&[1.0, 2.0]).unwrap(),
            &DiscreteDistribution::uniform_1d(&[3.0, 4.0]).unwrap(),
            &KernelSpec::triangle(),
        )
        .unwrap();
        let table = mmd_zeta_table(&tri);
        assert_eq!(table.get(&[1, 0]), Some(0.0));
        assert!(table.get(&[2, 0]).unwrap() > 0.0 && table.get(&[0, 2]).unwrap() > 0.0);
    }

    #[test]
    fn first_order_tables_decay_at_rate_n_squared() {
        let p = DiscreteDistribution::new(Matrix::column(&[-0.5, 0.3, 1.1]), vec![0.3, 0.3, 0.4]).unwrap();
        let f = population_functionals(&p, &p, &KernelSpec::gaussian(0.8).unwrap()).unwrap();
        let table = mmd_zeta_table(&f);
        // Proportional sizes (n, 2n): n²·Var = 2‖C‖²(n/(n-1) + n/(2(2n-1))) + 2⟨C,C⟩.
        let scaled: Vec<f64> = [4usize, 8, 16]
            .iter()
            .map(|&n| {
                let v = sen_variance(&table, &[n, 2 * n]).unwrap();
                let nf = n as f64;
                let hs = f.hs_pp;
                let expected = 2.0 * hs * (nf / (nf - 1.0) + nf / (2.0 * (2.0 * nf - 1.0))) + 2.0 * hs;
                assert!((nf * nf * v - expected).abs() < 1e-12 * expected);
                nf * nf * v
            })
            .collect();
        assert!(scaled.windows(2).all(|w| w[1] < w[0] && w[1] > 0.8 * w[0]));
    }
}
