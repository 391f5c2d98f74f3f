//! Kernel selection by the estimated signal-to-noise ratio
//! `MMD̂² / (σ̂ + λ)` on a training split.
//!
//! The search evaluates the full parameter grid, then refines each parameter
//! by golden-section search inside the bracket formed by the grid neighbours of
//! the incumbent. Positive-valued parameters are refined in log space. Ties go
//! to the smaller parameter value.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::mmd_unbiased;
use crate::kernels::{gram_blocks, KernelFamily, KernelSpec};
use crate::math;
use crate::matrix::SampleSet;
use crate::rng::stream_rng;
use crate::variance::{plugin_zetas, sigma_hat};

pub const DEFAULT_LAMBDA: f64 = 1e-8;
const SPLIT_STREAM: u64 = 0x7370_6c69_7400_0001;
const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Sample sizes used for the `ρ` ratios inside `σ̂`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SigmaSizes {
    /// The sizes of the data the objective is evaluated on.
    #[default]
    Training,
    /// Fixed sizes, e.g. those of the intended test split.
    Fixed { n_x: usize, n_y: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuneConfig {
    pub family: KernelFamily,
    /// Candidate values per parameter; sorted before use.
    pub param_grid: BTreeMap<String, Vec<f64>>,
    #[serde(default = "default_lambda")]
    pub lambda_reg: f64,
    #[serde(default)]
    pub refine_steps: usize,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub sigma_sizes: SigmaSizes,
}

fn default_lambda() -> f64 {
    DEFAULT_LAMBDA
}

fn default_train_fraction() -> f64 {
    0.5
}

/// `count` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return alloc::vec![lo];
    }
    let (a, b) = (math::ln(lo), math::ln(hi));
    (0..count)
        .map(|i| math::exp(a + (b - a) * i as f64 / (count - 1) as f64))
        .collect()
}

impl TuneConfig {
    /// Gaussian lengthscales on `grid` with default settings.
    pub fn gaussian(grid: Vec<f64>) -> Self {
        let mut param_grid = BTreeMap::new();
        param_grid.insert("lengthscale".into(), grid);
        Self {
            family: KernelFamily::Gaussian,
            param_grid,
            lambda_reg: DEFAULT_LAMBDA,
            refine_steps: 0,
            train_fraction: 0.5,
            seed: 0,
            sigma_sizes: SigmaSizes::Training,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_reg > 0.0 && self.lambda_reg.is_finite()) {
            return Err(Error::Parameter("lambda_reg must be positive".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Parameter("train_fraction must lie in (0, 1)".into()));
        }
        let expected = self.family.parameter_names();
        if self.param_grid.len() != expected.len()
            || expected.iter().any(|n| !self.param_grid.contains_key(*n))
        {
            return Err(Error::Parameter(format!(
                "{} kernel needs grids for {:?}",
                self.family.name(),
                expected
            )));
        }
        for (name, grid) in &self.param_grid {
            if grid.is_empty() || grid.iter().any(|v| !v.is_finite()) {
                return Err(Error::Parameter(format!("grid for {name} is empty or non-finite")));
            }
        }
        Ok(())
    }
}

/// `MMD̂² / (σ̂ + λ)` with `σ̂` at the data's own sizes.
pub fn snr_objective(samples: &SampleSet, spec: &KernelSpec, lambda_reg: f64) -> Result<f64> {
    snr_objective_sized(samples, spec, lambda_reg, SigmaSizes::Training)
}

pub fn snr_objective_sized(
    samples: &SampleSet,
    spec: &KernelSpec,
    lambda_reg: f64,
    sizes: SigmaSizes,
) -> Result<f64> {
    if !(lambda_reg > 0.0) {
        return Err(Error::Parameter("lambda_reg must be positive".into()));
    }
    let blocks = gram_blocks(spec, samples)?;
    let mmd = mmd_unbiased(&blocks)?.value;
    let (zx, zy) = plugin_zetas(&blocks);
    let (nx, ny) = match sizes {
        SigmaSizes::Training => (samples.nx(), samples.ny()),
        SigmaSizes::Fixed { n_x, n_y } => (n_x, n_y),
    };
    Ok(mmd / (sigma_hat(zx, zy, nx, ny) + lambda_reg))
}

/// Disjoint train/test split of each group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub train: SampleSet,
    pub test: SampleSet,
    pub train_x: Vec<usize>,
    pub train_y: Vec<usize>,
    pub test_x: Vec<usize>,
    pub test_y: Vec<usize>,
}

fn split_indices(n: usize, fraction: f64, seed: u64, group: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut stream_rng(seed, &[SPLIT_STREAM, group]));
    let k = math::round(fraction * n as f64) as usize;
    let mut train = idx[..k].to_vec();
    let mut test = idx[k..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

/// Seeded per-group split keeping `round(fraction·n)` rows for training.
pub fn split(samples: &SampleSet, train_fraction: f64, seed: u64) -> Result<Split> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Parameter("train_fraction must lie in (0, 1)".into()));
    }
    let (train_x, test_x) = split_indices(samples.nx(), train_fraction, seed, 0);
    let (train_y, test_y) = split_indices(samples.ny(), train_fraction, seed, 1);
    for (name, part) in [
        ("training X", &train_x),
        ("training Y", &train_y),
        ("test X", &test_x),
        ("test Y", &test_y),
    ] {
        if part.len() < 2 {
            return Err(Error::DegenerateSplit(format!(
                "{name} has {} rows, need at least 2",
                part.len()
            )));
        }
    }
    let (x, y) = (samples.x(), samples.y());
    Ok(Split {
        train: SampleSet::new(x.select_rows(&train_x), y.select_rows(&train_y))?,
        test: SampleSet::new(x.select_rows(&test_x), y.select_rows(&test_y))?,
        train_x,
        train_y,
        test_x,
        test_y,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub spec: KernelSpec,
    pub objective: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub best_spec: KernelSpec,
    pub objective: f64,
    /// Grid evaluations in grid order, then refinement evaluations.
    pub trace: Vec<TraceEntry>,
    /// Row indices of the split; empty when tuning on given data directly.
    pub train_x: Vec<usize>,
    pub train_y: Vec<usize>,
    pub test_x: Vec<usize>,
    pub test_y: Vec<usize>,
}

/// Split `samples`, tune on the training part, and report the split.
pub fn tune(samples: &SampleSet, config: &TuneConfig) -> Result<TuneResult> {
    config.validate()?;
    let parts = split(samples, config.train_fraction, config.seed)?;
    let mut result = tune_on(&parts.train, config)?;
    result.train_x = parts.train_x;
    result.train_y = parts.train_y;
    result.test_x = parts.test_x;
    result.test_y = parts.test_y;
    Ok(result)
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

/// Tune on `train` as given, without splitting.
pub fn tune_on(train: &SampleSet, config: &TuneConfig) -> Result<TuneResult> {
    config.validate()?;
    let names: Vec<&String> = config.param_grid.keys().collect();
    let grids: Vec<Vec<f64>> = config
        .param_grid
        .values()
        .map(|g| {
            let mut g = g.clone();
            g.sort_by(f64::total_cmp);
            g.dedup();
            g
        })
        .collect();

    let build = |values: &[f64]| -> Result<KernelSpec> {
        let params = names
            .iter()
            .zip(values)
            .map(|(n, v)| ((*n).clone(), *v))
            .collect();
        KernelSpec::new(config.family, params)
    };
    let objective = |spec: &KernelSpec| -> Result<f64> {
        snr_objective_sized(train, spec, config.lambda_reg, config.sigma_sizes).map(sanitize)
    };

    // Cartesian grid, last parameter fastest.
    let total: usize = grids.iter().map(Vec::len).product();
    let points: Vec<Vec<f64>> = (0..total)
        .map(|mut flat| {
            let mut values = alloc::vec![0.0; grids.len()];
            for (j, g) in grids.iter().enumerate().rev() {
                values[j] = g[flat % g.len()];
                flat /= g.len();
            }
            values
        })
        .collect();
    let specs: Vec<KernelSpec> = points.iter().map(|p| build(p)).collect::<Result<_>>()?;
    let scores = crate::exec::map_indices(specs.len(), |i| objective(&specs[i]));
    let mut trace = Vec::with_capacity(specs.len());
    for (spec, score) in specs.iter().zip(scores) {
        trace.push(TraceEntry {
            spec: spec.clone(),
            objective: score?,
        });
    }

    let mut best = 0;
    for (i, t) in trace.iter().enumerate() {
        // Grid order is ascending, so strict improvement keeps the smaller value on ties.
        if t.objective > trace[best].objective {
            best = i;
        }
    }
    let mut best_values = points[best].clone();
    let mut best_score = trace[best].objective;

    for _round in 0..usize::from(config.refine_steps > 0) {
        for (axis, grid) in grids.iter().enumerate() {
            if grid.len() < 2 {
                continue;
            }
            let pos = grid.iter().position(|v| *v == best_values[axis]);
            let (lo, hi) = match pos {
                Some(i) => (grid[i.saturating_sub(1)], grid[(i + 1).min(grid.len() - 1)]),
                None => continue,
            };
            let log = lo > 0.0;
            let (to, from): (fn(f64) -> f64, fn(f64) -> f64) = if log {
                (math::ln, math::exp)
            } else {
                (|v| v, |v| v)
            };
            let base = best_values.clone();
            let eval = |u: f64, trace: &mut Vec<TraceEntry>| -> Result<(f64, f64)> {
                let mut values = base.clone();
                values[axis] = from(u);
                let spec = build(&values)?;
                let score = objective(&spec)?;
                trace.push(TraceEntry { spec, objective: score });
                Ok((values[axis], score))
            };
            let (mut a, mut b) = (to(lo), to(hi));
            let mut c = b - INV_PHI * (b - a);
            let mut d = a + INV_PHI * (b - a);
            let mut fc = eval(c, &mut trace)?;
            let mut fd = eval(d, &mut trace)?;
            let consider = |(v, s): (f64, f64), best_values: &mut Vec<f64>, best_score: &mut f64| {
                if s > *best_score || (s == *best_score && v < best_values[axis]) {
                    best_values[axis] = v;
                    *best_score = s;
                }
            };
            consider(fc, &mut best_values, &mut best_score);
            consider(fd, &mut best_values, &mut best_score);
            for _ in 2..config.refine_steps.max(2) {
                if fc.1 >= fd.1 {
                    b = d;
                    d = c;
                    fd = fc;
                    c = b - INV_PHI * (b - a);
                    fc = eval(c, &mut trace)?;
                    consider(fc, &mut best_values, &mut best_score);
                } else {
                    a = c;
                    c = d;
                    fc = fd;
                    d = a + INV_PHI * (b - a);
                    fd = eval(d, &mut trace)?;
                    consider(fd, &mut best_values, &mut best_score);
                }
            }
        }
    }

    Ok(TuneResult {
        best_spec: build(&best_values)?,
        objective: best_score,
        trace,
        train_x: Vec::new(),
        train_y: Vec::new(),
        test_x: Vec::new(),
        test_y: Vec::new(),
    })
}
