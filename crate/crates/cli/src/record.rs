//! Run records: every output carries the command, library version, seed and a
//! SHA-256 of the resolved configuration.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use clap::ValueEnum;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Serialize)]
pub struct RunRecord<'a, C, R> {
    pub command: &'static str,
    pub version: &'static str,
    pub seed: u64,
    pub config_hash: String,
    pub config: &'a C,
    pub result: &'a R,
}

/// A result that can also be written as one CSV table with a header row.
pub trait CsvTable {
    fn write_csv<W: Write>(&self, w: &mut csv::Writer<W>) -> csv::Result<()>;
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn config_hash<C: Serialize>(command: &str, config: &C) -> String {
    let body = serde_json::to_vec(&(command, config)).expect("config serializes");
    sha256_hex(&body)
}

/// Render a record in the requested format. CSV output starts with one
/// `#` comment line holding the record metadata.
pub fn render<C, R>(command: &'static str, seed: u64, config: &C, result: &R, format: Format) -> Result<Vec<u8>>
where
    C: Serialize,
    R: Serialize + CsvTable,
{
    let record = RunRecord {
        command,
        version: VERSION,
        seed,
        config_hash: config_hash(command, config),
        config,
        result,
    };
    match format {
        Format::Json => {
            let mut out = serde_json::to_vec_pretty(&record).expect("record serializes");
            out.push(b'\n');
            Ok(out)
        }
        Format::Csv => {
            let mut out = format!(
                "# command={} version={} seed={} config_sha256={}\n",
                record.command, record.version, record.seed, record.config_hash
            )
            .into_bytes();
            let mut w = csv::Writer::from_writer(&mut out);
            result
                .write_csv(&mut w)
                .and_then(|_| w.flush().map_err(csv::Error::from))
                .map_err(|e| CliError::Usage(format!("cannot render CSV: {e}")))?;
            drop(w);
            Ok(out)
        }
    }
}

/// Write `bytes` to `out`, or to stdout when no path is given.
pub fn emit(bytes: &[u8], out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => File::create(path)
            .and_then(|mut f| f.write_all(bytes))
            .map_err(|e| CliError::io(path, e)),
        None => std::io::stdout()
            .lock()
            .write_all(bytes)
            .map_err(|e| CliError::io("<stdout>", e)),
    }
}
