use std::io::Write;
use std::path::PathBuf;

use clap::Args;
use mmd_core::permtest::{permutation_test, TestResult};
use mmd_core::rng::derive_seed;
use mmd_core::tuner::{log_grid, split, tune_on, TuneConfig, TuneResult};
use serde::Serialize;

use super::{check_test_params, load_samples, read_json, Context, InputFile};
use crate::error::{CliError, Result};
use crate::io::save_matrix;
use crate::record::CsvTable;

const HELD_OUT_TEST: u64 = 0x6865_6c64_0000_0001;

#[derive(Args, Debug)]
pub struct TuneArgs {
    /// Headerless CSV of samples from P.
    pub x: PathBuf,
    /// Headerless CSV of samples from Q.
    pub y: PathBuf,

    /// JSON tuning configuration; defaults to a 13-point gaussian grid on
    /// [0.05, 100] with 8 refinement steps. Its seed is replaced by --seed.
    #[arg(long, env = "MMD_TUNE_CONFIG")]
    pub config: Option<PathBuf>,

    #[arg(long, default_value_t = 0.05, env = "MMD_ALPHA")]
    pub alpha: f64,

    /// Relabelings for the held-out test.
    #[arg(long, default_value_t = 200, env = "MMD_PERMUTATIONS")]
    pub permutations: usize,

    /// Write train_x.csv, train_y.csv, test_x.csv and test_y.csv here.
    #[arg(long)]
    pub split_dir: Option<PathBuf>,
}

#[derive(Serialize)]
struct TuneRunConfig {
    inputs: [InputFile; 2],
    tune: TuneConfig,
    alpha: f64,
    permutations: usize,
}

#[derive(Serialize)]
pub struct TuneReport {
    tune: TuneResult,
    /// Permutation test of the selected kernel on the held-out split.
    held_out: TestResult,
}

#[derive(Serialize)]
struct TraceRow<'a> {
    family: &'a str,
    params: String,
    objective: f64,
    selected: bool,
}

impl CsvTable for TuneReport {
    fn write_csv<W: Write>(&self, w: &mut csv::Writer<W>) -> csv::Result<()> {
        for entry in &self.tune.trace {
            let params: Vec<String> = entry.spec.params().iter().map(|(k, v)| format!("{k}={v}")).collect();
            w.serialize(TraceRow {
                family: entry.spec.family().name(),
                params: params.join(";"),
                objective: entry.objective,
                selected: entry.spec == self.tune.best_spec,
            })?;
        }
        Ok(())
    }
}

pub fn default_config() -> TuneConfig {
    TuneConfig {
        refine_steps: 8,
        ..TuneConfig::gaussian(log_grid(0.05, 100.0, 13))
    }
}

pub fn run(args: &TuneArgs, ctx: &Context) -> Result<()> {
    check_test_params(args.alpha, args.permutations)?;
    let mut config = match &args.config {
        Some(path) => read_json::<TuneConfig>(path)?,
        None => default_config(),
    };
    config.seed = ctx.seed;
    config.validate()?;
    let (samples, inputs) = load_samples(&args.x, &args.y)?;

    // Tuning sees only the training split; the test below sees only the rest.
    let parts = split(&samples, config.train_fraction, config.seed)?;
    let mut tuned = tune_on(&parts.train, &config)?;
    let seed = derive_seed(ctx.seed, &[HELD_OUT_TEST]);
    let held_out = permutation_test(&parts.test, &tuned.best_spec, args.alpha, args.permutations, seed)?;

    if let Some(dir) = &args.split_dir {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        for (name, m) in [
            ("train_x.csv", parts.train.x()),
            ("train_y.csv", parts.train.y()),
            ("test_x.csv", parts.test.x()),
            ("test_y.csv", parts.test.y()),
        ] {
            save_matrix(&dir.join(name), m)?;
        }
    }
    tuned.train_x = parts.train_x;
    tuned.train_y = parts.train_y;
    tuned.test_x = parts.test_x;
    tuned.test_y = parts.test_y;

    let run_config = TuneRunConfig {
        inputs,
        tune: config,
        alpha: args.alpha,
        permutations: args.permutations,
    };
    ctx.finish("tune", &run_config, &TuneReport { tune: tuned, held_out })
}
