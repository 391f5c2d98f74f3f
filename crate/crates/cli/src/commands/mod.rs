pub mod null_dist;
pub mod oracle_check;
pub mod power_sim;
pub mod tune;
pub mod variance;

use std::path::{Path, PathBuf};

use clap::Args;
use mmd_core::kernels::{KernelFamily, KernelSpec};
use mmd_core::SampleSet;
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::io;
use crate::record::{self, sha256_hex, CsvTable, Format};

/// Settings shared by every subcommand.
#[derive(Clone, Debug)]
pub struct Context {
    pub seed: u64,
    pub format: Format,
    pub out: Option<PathBuf>,
}

impl Context {
    pub fn finish<C, R>(&self, command: &'static str, config: &C, result: &R) -> Result<()>
    where
        C: Serialize,
        R: Serialize + CsvTable,
    {
        let bytes = record::render(command, self.seed, config, result, self.format)?;
        record::emit(&bytes, self.out.as_deref())
    }
}

#[derive(Args, Clone, Debug)]
pub struct KernelArgs {
    /// Kernel family: gaussian, linear or triangle.
    #[arg(long, default_value = "gaussian", env = "MMD_KERNEL")]
    pub kernel: KernelFamily,

    /// Gaussian lengthscale ℓ in exp(−‖x−y‖²/(2ℓ²)).
    #[arg(long, default_value_t = 1.0, env = "MMD_LENGTHSCALE")]
    pub lengthscale: f64,
}

impl KernelArgs {
    pub fn spec(&self) -> Result<KernelSpec> {
        Ok(match self.kernel {
            KernelFamily::Gaussian => KernelSpec::gaussian(self.lengthscale)?,
            KernelFamily::Linear => KernelSpec::linear(),
            KernelFamily::Triangle => KernelSpec::triangle(),
        })
    }
}

/// Check test parameters before any data is read.
pub fn check_test_params(alpha: f64, permutations: usize) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(CliError::Usage(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if permutations == 0 {
        return Err(CliError::Usage("permutations must be positive".into()));
    }
    Ok(())
}

/// A data file together with the digest of its bytes.
#[derive(Clone, Debug, Serialize)]
pub struct InputFile {
    pub path: String,
    pub sha256: String,
}

fn load(path: &Path) -> Result<(mmd_core::Matrix, InputFile)> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    let m = io::parse_matrix(bytes.as_slice(), path)?;
    let info = InputFile {
        path: path.display().to_string(),
        sha256: sha256_hex(&bytes),
    };
    Ok((m, info))
}

/// Load the two sample files, checking that their widths agree.
pub fn load_samples(x: &Path, y: &Path) -> Result<(SampleSet, [InputFile; 2])> {
    let (mx, ix) = load(x)?;
    let (my, iy) = load(y)?;
    if mx.cols() != my.cols() {
        return Err(CliError::Data {
            path: y.to_path_buf(),
            message: format!("has {} columns but {} has {}", my.cols(), x.display(), mx.cols()),
        });
    }
    Ok((SampleSet::new(mx, my)?, [ix, iy]))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        line: e.line() as u64,
        message: e.to_string(),
    })
}
