//! Scaled-statistic distributions for the proportional (`nY = nX/2`) and
//! non-proportional (`nY = ⌈5√nX⌉`) regimes, with histograms for both
//! `min(nX, nY)` and `nX + nY` scaling and Q-Q pairs against the limit law of
//! the min-scaled statistic.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use mmd_core::asymptotics::{
    alt_limit, estimate_null_eigenvalues_owned, rhos, sample_null_limit, SpectralModel,
    DEFAULT_MAX_EIGENVALUES,
};
use mmd_core::estimators::mmd_unbiased;
use mmd_core::kernels::{gram_blocks, gram_matrix, KernelSpec};
use mmd_core::rng::{derive_seed, stream_rng};
use mmd_core::sim::{draw_samples, statistic_draws, SampleDistribution};
use mmd_core::stats;
use mmd_core::variance::plugin_zetas;
use serde::Serialize;

use super::{Context, KernelArgs};
use crate::error::{CliError, Result};
use crate::record::{render, CsvTable, Format};

const REFERENCE: u64 = 0x7265_6600_0000_0001;
const DRAWS: u64 = 0x6472_6177_0000_0002;
const LIMIT: u64 = 0x6c69_6d00_0000_0001;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// P = Q = Laplace(0, 1/√2).
    Null,
    /// P = Laplace(0, 1/√2), Q = Laplace(0, 3).
    Alternative,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// nY = nX / 2.
    Proportional,
    /// nY = ⌈5√nX⌉.
    Sqrt,
}

impl Regime {
    pub fn n_y(self, n_x: usize) -> usize {
        match self {
            Regime::Proportional => n_x / 2,
            Regime::Sqrt => (5.0 * (n_x as f64).sqrt()).ceil() as usize,
        }
    }
}

#[derive(Args, Debug)]
pub struct NullDistArgs {
    #[arg(long, value_enum, default_value_t = Mode::Null)]
    pub mode: Mode,

    #[arg(long, value_enum, default_value_t = Regime::Sqrt)]
    pub regime: Regime,

    #[arg(long, value_delimiter = ',', default_value = "100,400,1600")]
    pub n_x: Vec<usize>,

    #[command(flatten)]
    pub kernel: KernelArgs,

    /// Statistic draws per size.
    #[arg(long, default_value_t = 2000, env = "MMD_REPS")]
    pub reps: usize,

    /// Per-group size of the reference sample for eigenvalues or ζ.
    #[arg(long, default_value_t = 5000)]
    pub reference_size: usize,

    /// Draws from the null limit law.
    #[arg(long, default_value_t = 100_000)]
    pub limit_draws: usize,

    #[arg(long, default_value_t = 40)]
    pub bins: usize,

    #[arg(long, default_value_t = 99)]
    pub qq_points: usize,

    /// Also write Q-Q pairs (empirical, theoretical) as CSV here.
    #[arg(long)]
    pub qq: Option<PathBuf>,
}

#[derive(Serialize)]
struct NullDistConfig {
    mode: Mode,
    regime: Regime,
    p: SampleDistribution,
    q: SampleDistribution,
    kernel: KernelSpec,
    n_x: Vec<usize>,
    reps: usize,
    reference_size: usize,
    limit_draws: usize,
    bins: usize,
    qq_points: usize,
    seed: u64,
}

/// Quantities estimated once from the reference sample.
#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum Reference {
    Null { eigenvalues: Vec<f64> },
    Alternative { mmd_sq: f64, zeta_x: f64, zeta_y: f64 },
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Bin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct QqPair {
    pub empirical: f64,
    pub theoretical: f64,
}

#[derive(Serialize)]
struct Scaled {
    mean: f64,
    variance: f64,
    histogram: Vec<Bin>,
}

#[derive(Serialize)]
struct SizeReport {
    n_x: usize,
    n_y: usize,
    min_scaled: Scaled,
    sum_scaled: Scaled,
    /// Two-sample (null) or one-sample (alternative) KS distance of the
    /// min-scaled statistic to its limit law.
    ks_min: f64,
    qq: Vec<QqPair>,
}

#[derive(Serialize)]
pub struct NullDistReport {
    reference: Reference,
    sizes: Vec<SizeReport>,
}

#[derive(Serialize)]
struct HistRow<'a> {
    n_x: usize,
    n_y: usize,
    scaling: &'a str,
    lower: f64,
    upper: f64,
    count: usize,
}

#[derive(Serialize)]
struct QqRow {
    n_x: usize,
    n_y: usize,
    empirical: f64,
    theoretical: f64,
}

impl CsvTable for NullDistReport {
    fn write_csv<W: Write>(&self, w: &mut csv::Writer<W>) -> csv::Result<()> {
        for s in &self.sizes {
            for (scaling, part) in [("min", &s.min_scaled), ("sum", &s.sum_scaled)] {
                for b in &part.histogram {
                    w.serialize(HistRow {
                        n_x: s.n_x,
                        n_y: s.n_y,
                        scaling,
                        lower: b.lower,
                        upper: b.upper,
                        count: b.count,
                    })?;
                }
            }
        }
        Ok(())
    }
}

struct QqTable<'a>(&'a NullDistReport);

impl CsvTable for QqTable<'_> {
    fn write_csv<W: Write>(&self, w: &mut csv::Writer<W>) -> csv::Result<()> {
        for s in &self.0.sizes {
            for p in &s.qq {
                w.serialize(QqRow {
                    n_x: s.n_x,
                    n_y: s.n_y,
                    empirical: p.empirical,
                    theoretical: p.theoretical,
                })?;
            }
        }
        Ok(())
    }
}

impl Serialize for QqTable<'_> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let pairs: Vec<_> = self.0.sizes.iter().map(|r| (r.n_x, r.n_y, &r.qq)).collect();
        pairs.serialize(s)
    }
}

/// Equal-width histogram over the range of `values`.
pub fn histogram(values: &[f64], bins: usize) -> Vec<Bin> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if values.is_empty() || bins == 0 {
        return Vec::new();
    }
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for v in values {
        let k = (((v - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(k, count)| Bin {
            lower: lo + k as f64 * width,
            upper: lo + (k + 1) as f64 * width,
            count,
        })
        .collect()
}

/// Plotting positions `(i − ½)/m`.
pub fn qq_probs(m: usize) -> Vec<f64> {
    (1..=m).map(|i| (i as f64 - 0.5) / m as f64).collect()
}

fn scaled(values: Vec<f64>, bins: usize) -> (Scaled, Vec<f64>) {
    let summary = Scaled {
        mean: stats::mean(&values),
        variance: stats::variance(&values),
        histogram: histogram(&values, bins),
    };
    (summary, values)
}

pub fn run(args: &NullDistArgs, ctx: &Context) -> Result<()> {
    if args.reps < 2 || args.limit_draws == 0 || args.reference_size < 2 {
        return Err(CliError::Usage(
            "reps and reference-size must be at least 2 and limit-draws positive".into(),
        ));
    }
    if args.n_x.is_empty() || args.bins == 0 || args.qq_points == 0 {
        return Err(CliError::Usage("n-x, bins and qq-points must be nonempty".into()));
    }
    for &nx in &args.n_x {
        if nx < 2 || args.regime.n_y(nx) < 2 {
            return Err(CliError::Usage(format!("nX = {nx} leaves fewer than 2 samples in a group")));
        }
    }
    let kernel = args.kernel.spec()?;
    let p = SampleDistribution::laplace(0.0, std::f64::consts::FRAC_1_SQRT_2);
    let q = match args.mode {
        Mode::Null => p.clone(),
        Mode::Alternative => SampleDistribution::laplace(0.0, 3.0),
    };

    let reference = match args.mode {
        Mode::Null => {
            let z = p.sample(args.reference_size, &mut stream_rng(ctx.seed, &[REFERENCE]))?;
            let eigenvalues =
                estimate_null_eigenvalues_owned(gram_matrix(&kernel, &z)?, DEFAULT_MAX_EIGENVALUES)?;
            Reference::Null { eigenvalues }
        }
        Mode::Alternative => {
            let n = args.reference_size;
            let s = draw_samples(&p, &q, n, n, derive_seed(ctx.seed, &[REFERENCE]), 0)?;
            let blocks = gram_blocks(&kernel, &s)?;
            let (zeta_x, zeta_y) = plugin_zetas(&blocks);
            Reference::Alternative {
                mmd_sq: mmd_unbiased(&blocks)?.value,
                zeta_x,
                zeta_y,
            }
        }
    };

    let probs = qq_probs(args.qq_points);
    let mut sizes = Vec::with_capacity(args.n_x.len());
    for (i, &nx) in args.n_x.iter().enumerate() {
        let ny = args.regime.n_y(nx);
        let draws_seed = derive_seed(ctx.seed, &[DRAWS, i as u64]);
        let t = statistic_draws(&p, &q, &kernel, (nx, ny), args.reps, draws_seed)?;
        let (n_min, n_sum) = (nx.min(ny) as f64, (nx + ny) as f64);
        let (min_vals, sum_vals, theoretical, ks_min) = match &reference {
            Reference::Null { eigenvalues } => {
                let model = SpectralModel::for_sizes(eigenvalues.clone(), nx, ny)?;
                let limit = sample_null_limit(&model, args.limit_draws, derive_seed(ctx.seed, &[LIMIT, i as u64]));
                let min_vals: Vec<f64> = t.iter().map(|v| n_min * v).collect();
                let ks = stats::ks_two_sample(&min_vals, &limit);
                let sum_vals = t.iter().map(|v| n_sum * v).collect();
                (min_vals, sum_vals, stats::quantiles(&limit, &probs), ks)
            }
            Reference::Alternative { mmd_sq, zeta_x, zeta_y } => {
                let (rho_x, rho_y) = rhos(nx, ny)?;
                let law = alt_limit(*zeta_x, *zeta_y, rho_x, rho_y, *mmd_sq)?;
                let min_vals: Vec<f64> = t.iter().map(|v| n_min.sqrt() * (v - mmd_sq)).collect();
                let ks = stats::ks_one_sample(&min_vals, |x| law.centered_cdf(x));
                let sum_vals = t.iter().map(|v| n_sum.sqrt() * (v - mmd_sq)).collect();
                let theoretical = probs.iter().map(|p| law.centered_quantile(*p)).collect();
                (min_vals, sum_vals, theoretical, ks)
            }
        };
        let (min_scaled, min_vals) = scaled(min_vals, args.bins);
        let (sum_scaled, _) = scaled(sum_vals, args.bins);
        let qq = stats::quantiles(&min_vals, &probs)
            .into_iter()
            .zip(theoretical)
            .map(|(empirical, theoretical)| QqPair { empirical, theoretical })
            .collect();
        sizes.push(SizeReport {
            n_x: nx,
            n_y: ny,
            min_scaled,
            sum_scaled,
            ks_min,
            qq,
        });
    }

    let config = NullDistConfig {
        mode: args.mode,
        regime: args.regime,
        p,
        q,
        kernel,
        n_x: args.n_x.clone(),
        reps: args.reps,
        reference_size: args.reference_size,
        limit_draws: args.limit_draws,
        bins: args.bins,
        qq_points: args.qq_points,
        seed: ctx.seed,
    };
    let report = NullDistReport { reference, sizes };
    if let Some(path) = &args.qq {
        let bytes = render("null-dist", ctx.seed, &config, &QqTable(&report), Format::Csv)?;
        crate::record::emit(&bytes, Some(path))?;
    }
    ctx.finish("null-dist", &config, &report)
}
