//! Plain-text matrix/factor files and the JSON run report.
//!
//! Instance format: first line `n`, then n lines of n space-separated
//! decimals; the matrix must be symmetric to relative 1e-12 or it is
//! rejected. Factor format: first line `n r`, then n lines of r values.
//! Values are written with `Display`, which round-trips f64 exactly.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::SYMMETRY_TOL;
use crate::error::{Error, Result};

/// Writes a symmetric instance matrix.
pub fn write_matrix(path: &Path, a: &DMatrix<f64>) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::Dimension(format!(
            "instance matrix must be square, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let mut out = String::new();
    let _ = writeln!(out, "{}", a.nrows());
    write_rows(&mut out, a);
    std::fs::write(path, out)?;
    Ok(())
}

/// Reads a symmetric instance matrix, rejecting asymmetric input.
pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let n: usize = lines
        .next()
        .ok_or_else(|| Error::Parse("empty matrix file".into()))?
        .trim()
        .parse()
        .map_err(|e| Error::Parse(format!("bad order line: {e}")))?;
    if n == 0 {
        return Err(Error::Parse("matrix order must be positive".into()));
    }
    let a = parse_rows(lines, n, n)?;
    let asym = (&a - a.transpose()).amax();
    if asym > SYMMETRY_TOL * a.amax().max(1.0) {
        return Err(Error::Parse(format!(
            "matrix is not symmetric: max |A - A^T| = {asym:.3e}"
        )));
    }
    Ok(a)
}

/// Writes an n x r factor with an `n r` header line.
pub fn write_factor(path: &Path, b: &DMatrix<f64>) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(out, "{} {}", b.nrows(), b.ncols());
    write_rows(&mut out, b);
    std::fs::write(path, out)?;
    Ok(())
}

/// Reads a factor written by [`write_factor`].
pub fn read_factor(path: &Path) -> Result<DMatrix<f64>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty factor file".into()))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| {
            t.parse()
                .map_err(|e| Error::Parse(format!("bad header: {e}")))
        })
        .collect::<Result<_>>()?;
    let [n, r] = dims[..] else {
        return Err(Error::Parse(format!(
            "factor header must be 'n r', got '{header}'"
        )));
    };
    if n == 0 || r == 0 {
        return Err(Error::Parse("factor dimensions must be positive".into()));
    }
    parse_rows(lines, n, r)
}

fn write_rows(out: &mut String, m: &DMatrix<f64>) {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if j > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{}", m[(i, j)]);
        }
        out.push('\n');
    }
}

fn parse_rows<'a>(
    lines: impl Iterator<Item = &'a str>,
    nrows: usize,
    ncols: usize,
) -> Result<DMatrix<f64>> {
    let mut a = DMatrix::zeros(nrows, ncols);
    let mut filled = 0usize;
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        if filled == nrows {
            return Err(Error::Parse(format!("more than {nrows} data rows")));
        }
        let values: Vec<f64> = line
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("row {}: '{t}': {e}", i + 1)))
            })
            .collect::<Result<_>>()?;
        if values.len() != ncols {
            return Err(Error::Parse(format!(
                "row {} has {} values, expected {ncols}",
                i + 1,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse(format!("row {} has non-finite values", i + 1)));
        }
        for (j, v) in values.into_iter().enumerate() {
            a[(filled, j)] = v;
        }
        filled += 1;
    }
    if filled != nrows {
        return Err(Error::Parse(format!(
            "expected {nrows} data rows, found {filled}"
        )));
    }
    Ok(a)
}

/// Machine-readable summary of one factorization run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CpRunReport {
    pub instance: String,
    pub n: usize,
    pub r: usize,
    pub sub_algorithm: String,
    pub success: bool,
    pub min_entry: f64,
    pub residual: f64,
    pub outer_iters: usize,
    pub total_iters: usize,
    pub wall_time_s: f64,
    pub seed: u64,
}
