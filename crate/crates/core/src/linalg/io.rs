//! Matrix serialization: plain CSV rows and `{"n": .., "data": [[..]]}` JSON.
//!
//! Readers reject NaN and infinities.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::{check_finite, SymMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixJson {
    n: usize,
    data: Vec<Vec<f64>>,
}

/// Parses CSV text into a dense matrix. Blank lines are skipped.
pub fn parse_csv(text: &str) -> Result<Array2<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .enumerate()
            .map(|(col, field)| {
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("line {}: bad number {:?}", lineno + 1, field.trim())))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::NonFinite { row: rows.len(), col })
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse(format!(
                    "line {}: expected {} columns, found {}",
                    lineno + 1,
                    first.len(),
                    row.len()
                )));
            }
        }
        rows.push(row);
    }
    let ncols = rows.first().map_or(0, Vec::len);
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Array2::from_shape_vec((rows.len(), ncols), flat).map_err(|e| Error::Parse(e.to_string()))
}

/// Formats rows with 17 significant digits, which round-trips every `f64`.
pub fn format_csv(a: ArrayView2<'_, f64>) -> String {
    let mut out = String::new();
    for row in a.rows() {
        let mut first = true;
        for v in row {
            if !first {
                out.push(',');
            }
            first = false;
            write!(out, "{v:.16e}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Array2<f64>> {
    parse_csv(&std::fs::read_to_string(path)?)
}

pub fn write_csv(path: impl AsRef<Path>, a: ArrayView2<'_, f64>) -> Result<()> {
    std::fs::write(path, format_csv(a))?;
    Ok(())
}

pub fn read_sym_csv(path: impl AsRef<Path>) -> Result<SymMatrix> {
    SymMatrix::new(read_csv(path)?)
}

pub fn to_json(a: &SymMatrix) -> Result<String> {
    let data = a.view().rows().into_iter().map(|r| r.to_vec()).collect();
    Ok(serde_json::to_string(&MatrixJson { n: a.n(), data })?)
}

pub fn from_json(text: &str) -> Result<SymMatrix> {
    let parsed: MatrixJson = serde_json::from_str(text)?;
    if parsed.data.len() != parsed.n {
        return Err(Error::DimensionMismatch { expected: parsed.n, got: parsed.data.len() });
    }
    let mut a = Array2::zeros((parsed.n, parsed.n));
    for (i, row) in parsed.data.iter().enumerate() {
        if row.len() != parsed.n {
            return Err(Error::DimensionMismatch { expected: parsed.n, got: row.len() });
        }
        for (j, &v) in row.iter().enumerate() {
            a[[i, j]] = v;
        }
    }
    check_finite(a.view())?;
    SymMatrix::new(a)
}
