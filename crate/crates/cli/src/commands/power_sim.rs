use std::io::Write;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use mmd_core::permtest::{rejection_rate, RatePoint, SimulationConfig};
use mmd_core::sim::SampleDistribution;
use serde::Serialize;

use super::{read_json, Context, KernelArgs};
use crate::error::Result;
use crate::record::CsvTable;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// P = Q = N(0, 1).
    Null,
    /// P = N(0, 1), Q = N(0, 1.2²).
    Alternative,
}

#[derive(Args, Debug)]
pub struct PowerSimArgs {
    #[arg(long, value_enum, default_value_t = Mode::Alternative)]
    pub mode: Mode,

    /// Sweep of nX values.
    #[arg(long, value_delimiter = ',', default_value = "50,100,200,400,800")]
    pub n_x: Vec<usize>,

    #[arg(long, default_value_t = 50)]
    pub n_y: usize,

    #[command(flatten)]
    pub kernel: KernelArgs,

    #[arg(long, default_value_t = 0.05, env = "MMD_ALPHA")]
    pub alpha: f64,

    #[arg(long, default_value_t = 200, env = "MMD_PERMUTATIONS")]
    pub permutations: usize,

    /// Independent tests per sweep point.
    #[arg(long, default_value_t = 2000, env = "MMD_REPS")]
    pub reps: usize,

    /// JSON simulation configuration; replaces every flag above. Its seed
    /// is replaced by --seed.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Serialize)]
#[serde(transparent)]
pub struct Curve(Vec<RatePoint>);

impl CsvTable for Curve {
    fn write_csv<W: Write>(&self, w: &mut csv::Writer<W>) -> csv::Result<()> {
        self.0.iter().try_for_each(|p| w.serialize(p))
    }
}

pub fn config_from_args(args: &PowerSimArgs, seed: u64) -> Result<SimulationConfig> {
    if let Some(path) = &args.config {
        let mut config: SimulationConfig = read_json(path)?;
        config.seed = seed;
        return Ok(config);
    }
    let q_sd = match args.mode {
        Mode::Null => 1.0,
        Mode::Alternative => 1.2,
    };
    Ok(SimulationConfig {
        p: SampleDistribution::normal(0.0, 1.0),
        q: SampleDistribution::normal(0.0, q_sd),
        kernel: args.kernel.spec()?,
        alpha: args.alpha,
        permutations: args.permutations,
        reps: args.reps,
        n_x: args.n_x.clone(),
        n_y: args.n_y,
        seed,
    })
}

pub fn run(args: &PowerSimArgs, ctx: &Context) -> Result<()> {
    let config = config_from_args(args, ctx.seed)?;
    let curve = Curve(rejection_rate(&config)?);
    ctx.finish("power-sim", &config, &curve)
}
