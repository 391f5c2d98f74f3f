//! Randomized check of the closed-form variances against enumeration.
//!
//! Each instance draws a pair of discrete distributions (support sizes 2–3),
//! a kernel family and sizes `nX, nY ∈ {2, 3, 4}`, then compares
//!
//! * `unbiased`: [`mmd_unbiased_variance`] against enumerated variance,
//! * `ustat`: [`mmd_ustat_variance`] against enumerated variance (when `nX = nY`),
//! * `sen`: [`sen_variance`] of [`mmd_zeta_table`] against enumerated variance,
//! * `zeta_table`: [`mmd_zeta_table`] against the conditioned enumeration.
//!
//! The `printed_extra_term` row tracks the variant with the additional
//! `⟨μ, Cμ⟩` term and is reported without a pass/fail verdict.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::estimators::EstimatorKind;
use crate::genustat::{mmd_gen_u_spec, mmd_zeta_table, sen_variance};
use crate::kernels::KernelSpec;
use crate::math;
use crate::matrix::Matrix;
use crate::oracle::{
    brute_force_moments, enumerate_zeta_table, population_functionals, DiscreteDistribution,
    PopulationFunctionals,
};
use crate::rng::stream_rng;
use crate::variance::{
    mmd_unbiased_variance_as_printed, mmd_ustat_variance, VarianceCoefficients,
};

pub const DEFAULT_TOLERANCE: f64 = 1e-10;

/// Formulas that must agree with enumeration.
pub const CHECKED: [&str; 4] = ["unbiased", "ustat", "sen", "zeta_table"];
/// Reported for comparison only.
pub const INFORMATIONAL: &str = "printed_extra_term";

const CORPUS_STREAM: u64 = 0x636f_7270_0000_0001;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub instances: usize,
    pub seed: u64,
    pub tolerance: f64,
    /// Multiply the `‖CP‖²` coefficient by this factor before comparing.
    pub perturbation: Option<f64>,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            instances: 240,
            seed: 0,
            tolerance: DEFAULT_TOLERANCE,
            perturbation: None,
        }
    }
}

/// One randomized instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub p: DiscreteDistribution,
    pub q: DiscreteDistribution,
    pub kernel: KernelSpec,
    pub nx: usize,
    pub ny: usize,
}

fn random_distribution<R: Rng>(rng: &mut R, dim: usize) -> DiscreteDistribution {
    let size = rng.random_range(2..=3);
    let support: Vec<f64> = (0..size * dim).map(|_| rng.random_range(-2.0..2.0)).collect();
    let weights: Vec<f64> = (0..size).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let probs = weights.iter().map(|w| w / total).collect();
    DiscreteDistribution::new(
        Matrix::new(size, dim, support).expect("sized above"),
        probs,
    )
    .expect("continuous draws give distinct points")
}

/// Instance `index` of the corpus for `seed`.
pub fn instance(seed: u64, index: usize) -> Instance {
    let mut rng = stream_rng(seed, &[CORPUS_STREAM, index as u64]);
    let (kernel, dim) = match index % 3 {
        0 => (
            KernelSpec::gaussian(rng.random_range(0.3..2.0)).expect("positive"),
            rng.random_range(1..=2),
        ),
        1 => (KernelSpec::linear(), rng.random_range(1..=2)),
        _ => (KernelSpec::triangle(), 1),
    };
    Instance {
        p: random_distribution(&mut rng, dim),
        q: random_distribution(&mut rng, dim),
        kernel,
        nx: rng.random_range(2..=4),
        ny: rng.random_range(2..=4),
    }
}

/// Largest relative error per formula over the corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusReport {
    pub instances: usize,
    pub seed: u64,
    pub tolerance: f64,
    pub max_rel_error: BTreeMap<String, f64>,
    pub passed: bool,
}

fn rel_error(value: f64, truth: f64) -> f64 {
    let diff = math::abs(value - truth);
    if diff == 0.0 {
        0.0
    } else {
        diff / math::abs(truth).max(f64::MIN_POSITIVE)
    }
}

fn record(map: &mut BTreeMap<String, f64>, name: &str, err: f64) {
    let slot = map.entry(name.into()).or_insert(0.0);
    if err > *slot || err.is_nan() {
        *slot = err;
    }
}

fn perturbed_total(f: &PopulationFunctionals, nx: usize, ny: usize, factor: Option<f64>) -> Result<f64> {
    let mut c = VarianceCoefficients::unbiased(nx, ny)?;
    if let Some(factor) = factor {
        c.hs_pp *= factor;
    }
    Ok(c.evaluate(f))
}

/// Errors of every formula on one instance.
pub fn check_instance(inst: &Instance, perturbation: Option<f64>) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    let f = population_functionals(&inst.p, &inst.q, &inst.kernel)?;
    let truth = brute_force_moments(&inst.p, &inst.q, &inst.kernel, inst.nx, inst.ny, EstimatorKind::Unbiased)?;

    let total = perturbed_total(&f, inst.nx, inst.ny, perturbation)?;
    record(&mut out, "unbiased", rel_error(total, truth.variance));

    let table = mmd_zeta_table(&f);
    let sen = sen_variance(&table, &[inst.nx, inst.ny])?;
    record(&mut out, "sen", rel_error(sen, truth.variance));

    let spec = mmd_gen_u_spec(inst.kernel.evaluator(inst.p.dim())?);
    let conditioned = enumerate_zeta_table(&spec, &[inst.p.clone(), inst.q.clone()])?;
    let scale = conditioned.iter().map(|(_, v)| math::abs(v)).fold(0.0, f64::max);
    let mut zeta_err: f64 = 0.0;
    for (d, v) in conditioned.iter() {
        let closed = table.get(d).unwrap_or(f64::NAN);
        // Entries can vanish exactly; measure against the table's scale.
        let err = if scale > 0.0 { math::abs(closed - v) / scale } else { math::abs(closed - v) };
        zeta_err = if err.is_nan() { f64::NAN } else { zeta_err.max(err) };
    }
    record(&mut out, "zeta_table", zeta_err);

    if inst.nx == inst.ny {
        let paired = brute_force_moments(&inst.p, &inst.q, &inst.kernel, inst.nx, inst.ny, EstimatorKind::Ustat)?;
        record(&mut out, "ustat", rel_error(mmd_ustat_variance(&f, inst.nx)?, paired.variance));
    }

    let printed = mmd_unbiased_variance_as_printed(&f, inst.nx, inst.ny)?;
    record(&mut out, INFORMATIONAL, rel_error(printed, truth.variance));
    Ok(out)
}

/// Run the corpus.
pub fn run_corpus(config: &CorpusConfig) -> Result<CorpusReport> {
    let per_instance = crate::exec::map_indices(config.instances, |i| {
        check_instance(&instance(config.seed, i), config.perturbation)
    });
    let mut max_rel_error = BTreeMap::new();
    for errors in per_instance {
        for (name, err) in errors? {
            record(&mut max_rel_error, &name, err);
        }
    }
    let passed = CHECKED.iter().all(|name| {
        max_rel_error
            .get(*name)
            .is_none_or(|e| *e <= config.tolerance)
    });
    Ok(CorpusReport {
        instances: config.instances,
        seed: config.seed,
        tolerance: config.tolerance,
        max_rel_error,
        passed,
    })
}
