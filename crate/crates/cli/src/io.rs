//! Headerless numeric CSV: one sample per row, one feature per column.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use mmd_core::Matrix;

use crate::error::{CliError, Result};

/// Parse a headerless numeric CSV into a matrix. Blank lines are skipped.
pub fn parse_matrix<R: Read>(reader: R, path: &Path) -> Result<Matrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut width: Option<usize> = None;
    let mut rows = 0usize;
    let mut data = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| CliError::Parse {
            path: path.to_path_buf(),
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(CliError::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: format!("expected {w} columns, found {}", record.len()),
                })
            }
            Some(_) => {}
        }
        for (col, field) in record.iter().enumerate() {
            let value: f64 = field.parse().map_err(|_| CliError::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("column {}: not a number: {field:?}", col + 1),
            })?;
            if !value.is_finite() {
                return Err(CliError::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: format!("column {}: non-finite value {field:?}", col + 1),
                });
            }
            data.push(value);
        }
        rows += 1;
    }
    let cols = width.ok_or_else(|| CliError::Data {
        path: path.to_path_buf(),
        message: "no data rows".into(),
    })?;
    Ok(Matrix::new(rows, cols, data)?)
}

/// Write a matrix in the format [`parse_matrix`] reads. Values use the
/// shortest representation that parses back to the same `f64`.
pub fn write_matrix<W: Write>(writer: W, m: &Matrix) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    for row in m.iter_rows() {
        w.write_record(row.iter().map(f64::to_string))?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_matrix(path: &Path, m: &Matrix) -> Result<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    write_matrix(file, m).map_err(|e| CliError::Data {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}
