use std::io::Write;

use clap::Args;
use mmd_core::corpus::{run_corpus, CorpusConfig, CorpusReport, CHECKED, DEFAULT_TOLERANCE};
use serde::Serialize;

use super::Context;
use crate::error::{CliError, Result};
use crate::record::CsvTable;

#[derive(Args, Debug)]
pub struct OracleCheckArgs {
    #[arg(long, default_value_t = 240)]
    pub instances: usize,

    /// Maximum relative error for every checked formula.
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    pub tolerance: f64,

    /// Multiply the ‖CP‖² coefficient by this factor to confirm the check
    /// detects a wrong formula.
    #[arg(long)]
    pub perturb: Option<f64>,
}

#[derive(Serialize)]
#[serde(transparent)]
pub struct Report(CorpusReport);

#[derive(Serialize)]
struct CorpusRow<'a> {
    formula: &'a str,
    max_rel_error: f64,
    checked: bool,
}

impl CsvTable for Report {
    fn write_csv<W: Write>(&self, w: &mut csv::Writer<W>) -> csv::Result<()> {
        for (formula, err) in &self.0.max_rel_error {
            w.serialize(CorpusRow {
                formula,
                max_rel_error: *err,
                checked: CHECKED.contains(&formula.as_str()),
            })?;
        }
        Ok(())
    }
}

pub fn run(args: &OracleCheckArgs, ctx: &Context) -> Result<()> {
    if args.instances == 0 {
        return Err(CliError::Usage("instances must be positive".into()));
    }
    if !(args.tolerance > 0.0) {
        return Err(CliError::Usage("tolerance must be positive".into()));
    }
    let config = CorpusConfig {
        instances: args.instances,
        seed: ctx.seed,
        tolerance: args.tolerance,
        perturbation: args.perturb,
    };
    let report = run_corpus(&config)?;
    let passed = report.passed;
    let worst = CHECKED
        .iter()
        .filter_map(|name| report.max_rel_error.get(*name).map(|e| (*name, *e)))
        .fold(("", 0.0), |acc, (n, e)| if e > acc.1 || e.is_nan() { (n, e) } else { acc });
    ctx.finish("oracle-check", &config, &Report(report))?;
    if passed {
        Ok(())
    } else {
        Err(CliError::Check(format!(
            "{} exceeds tolerance {:e} (max relative error {:e})",
            worst.0, args.tolerance, worst.1
        )))
    }
}
