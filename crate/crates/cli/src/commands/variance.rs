use std::io::Write;
use std::path::PathBuf;

use clap::Args;
use mmd_core::estimators::{mmd_unbiased, EstimatorKind};
use mmd_core::kernels::{gram_blocks, KernelSpec};
use mmd_core::oracle::{
    brute_force_moments, classify_degeneracy, population_functionals, Degeneracy,
    DiscreteDistribution, PopulationFunctionals, DEFAULT_DEGENERACY_TOL,
};
use mmd_core::variance::{mmd_unbiased_variance, mmd_ustat_variance, plugin_report, VarianceReport};
use serde::{Deserialize, Serialize};

use super::{load_samples, read_json, Context, InputFile, KernelArgs};
use crate::error::{CliError, Result};
use crate::record::CsvTable;

#[derive(Args, Debug)]
pub struct VarianceArgs {
    /// Headerless CSV of samples from P (plug-in mode).
    #[arg(long, requires = "y", conflicts_with = "dists")]
    pub x: Option<PathBuf>,
    /// Headerless CSV of samples from Q (plug-in mode).
    #[arg(long, requires = "x")]
    pub y: Option<PathBuf>,

    /// JSON `{"p": ..., "q": ...}` of discrete distributions (exact mode).
    #[arg(long, requires_all = ["n_x", "n_y"])]
    pub dists: Option<PathBuf>,
    #[arg(long)]
    pub n_x: Option<usize>,
    #[arg(long)]
    pub n_y: Option<usize>,

    /// In exact mode, also enumerate every sample to confirm the variance.
    #[arg(long)]
    pub enumerate: bool,

    #[command(flatten)]
    pub kernel: KernelArgs,
}

#[derive(Deserialize, Serialize)]
struct DistPair {
    p: DiscreteDistribution,
    q: DiscreteDistribution,
}

#[derive(Serialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
enum VarianceConfig {
    Plugin { inputs: [InputFile; 2], kernel: KernelSpec },
    Exact { dists: DistPair, kernel: KernelSpec, n_x: usize, n_y: usize, enumerate: bool },
}

#[derive(Serialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum VarianceResult {
    Plugin {
        n_x: usize,
        n_y: usize,
        mmd_sq: f64,
        report: VarianceReport,
    },
    Exact {
        n_x: usize,
        n_y: usize,
        functionals: PopulationFunctionals,
        degeneracy: Degeneracy,
        report: VarianceReport,
        /// Paired estimator variance, when `nX = nY`.
        ustat_variance: Option<f64>,
        enumerated_variance: Option<f64>,
    },
}

#[derive(Serialize)]
struct Row<'a> {
    name: &'a str,
    value: f64,
}

fn report_rows(r: &VarianceReport) -> [(&'static str, f64); 5] {
    [
        ("leading", r.leading),
        ("total", r.total),
        ("zeta_hat_x", r.zeta_hat_x),
        ("zeta_hat_y", r.zeta_hat_y),
        ("sigma_hat", r.sigma_hat),
    ]
}

impl CsvTable for VarianceResult {
    fn write_csv<W: Write>(&self, w: &mut csv::Writer<W>) -> csv::Result<()> {
        let mut rows: Vec<(&str, f64)> = Vec::new();
        match self {
            VarianceResult::Plugin { n_x, n_y, mmd_sq, report } => {
                rows.extend([("n_x", *n_x as f64), ("n_y", *n_y as f64), ("mmd_sq", *mmd_sq)]);
                rows.extend(report_rows(report));
            }
            VarianceResult::Exact { n_x, n_y, functionals: f, report, ustat_variance, enumerated_variance, .. } => {
                rows.extend([
                    ("n_x", *n_x as f64),
                    ("n_y", *n_y as f64),
                    ("mmd_sq", f.mmd_sq),
                    ("zeta_x", f.zeta_x),
                    ("zeta_y", f.zeta_y),
                    ("hs_pp", f.hs_pp),
                    ("hs_qq", f.hs_qq),
                    ("hs_pq", f.hs_pq),
                ]);
                rows.extend(report_rows(report));
                rows.extend(ustat_variance.map(|v| ("ustat_variance", v)));
                rows.extend(enumerated_variance.map(|v| ("enumerated_variance", v)));
            }
        }
        rows.into_iter().try_for_each(|(name, value)| w.serialize(Row { name, value }))
    }
}

pub fn run(args: &VarianceArgs, ctx: &Context) -> Result<()> {
    let kernel = args.kernel.spec()?;
    match (&args.x, &args.y, &args.dists) {
        (Some(x), Some(y), None) => {
            let (samples, inputs) = load_samples(x, y)?;
            let blocks = gram_blocks(&kernel, &samples)?;
            let result = VarianceResult::Plugin {
                n_x: samples.nx(),
                n_y: samples.ny(),
                mmd_sq: mmd_unbiased(&blocks)?.value,
                report: plugin_report(&blocks),
            };
            ctx.finish("variance", &VarianceConfig::Plugin { inputs, kernel }, &result)
        }
        (None, None, Some(path)) => {
            let dists: DistPair = read_json(path)?;
            let (n_x, n_y) = (args.n_x.unwrap_or(0), args.n_y.unwrap_or(0));
            let f = population_functionals(&dists.p, &dists.q, &kernel)?;
            let enumerated_variance = if args.enumerate {
                Some(brute_force_moments(&dists.p, &dists.q, &kernel, n_x, n_y, EstimatorKind::Unbiased)?.variance)
            } else {
                None
            };
            let result = VarianceResult::Exact {
                n_x,
                n_y,
                functionals: f,
                degeneracy: classify_degeneracy(&f, DEFAULT_DEGENERACY_TOL),
                report: mmd_unbiased_variance(&f, n_x, n_y)?,
                ustat_variance: if n_x == n_y { Some(mmd_ustat_variance(&f, n_x)?) } else { None },
                enumerated_variance,
            };
            let config = VarianceConfig::Exact {
                dists,
                kernel,
                n_x,
                n_y,
                enumerate: args.enumerate,
            };
            ctx.finish("variance", &config, &result)
        }
        _ => Err(CliError::Usage(
            "give either --x and --y, or --dists with --n-x and --n-y".into(),
        )),
    }
}
