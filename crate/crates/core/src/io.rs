//! Plain-CSV interchange: matrices row-major without headers, spectra
//! one value per line ascending.

use crate::linalg::{DataMatrix, LinalgError, Spectrum, SymMatrix};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: cannot parse {token:?} as a number")]
    Parse { line: usize, token: String },
    #[error("line {line}: expected {expected} columns, found {found}")]
    Ragged {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("no data rows")]
    Empty,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub fn parse_matrix_csv(text: &str) -> Result<DataMatrix, IoError> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for token in line.split(',') {
            let token = token.trim();
            row.push(token.parse::<f64>().map_err(|_| IoError::Parse {
                line: idx + 1,
                token: token.to_string(),
            })?);
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(IoError::Ragged {
                    line: idx + 1,
                    expected: first.len(),
                    found: row.len(),
                });
            }
        }
        rows.push(row);
    }
    let m = rows.len();
    if m == 0 {
        return Err(IoError::Empty);
    }
    let n = rows[0].len();
    Ok(DataMatrix::new(m, n, rows.into_iter().flatten().collect())?)
}

pub fn read_matrix_csv(path: &Path) -> Result<DataMatrix, IoError> {
    let text = fs::read_to_string(path).map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })?;
    parse_matrix_csv(&text)
}

/// Read a square matrix and require exact symmetry.
pub fn read_sym_matrix_csv(path: &Path) -> Result<SymMatrix, IoError> {
    let x = read_matrix_csv(path)?;
    if x.rows() != x.cols() {
        return Err(IoError::Linalg(LinalgError::DimensionMismatch {
            left: x.rows(),
            right: x.cols(),
        }));
    }
    Ok(SymMatrix::from_full(x.rows(), x.entries())?)
}

pub fn matrix_to_csv(x: &DataMatrix) -> String {
    let mut out = String::new();
    for i in 0..x.rows() {
        for (j, v) in x.row(i).iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            let _ = write!(out, "{v}");
        }
        out.push('\n');
    }
    out
}

pub fn sym_matrix_to_csv(a: &SymMatrix) -> String {
    let n = a.dim();
    let full = a.to_full();
    let x = DataMatrix::new(n, n, full).expect("expanded symmetric matrix is finite");
    matrix_to_csv(&x)
}

pub fn spectrum_to_lines(s: &Spectrum) -> String {
    let mut out = String::new();
    for v in s.values() {
        let _ = writeln!(out, "{v}");
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    fs::write(path, text).map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_round_trip_is_exact() {
        let x = DataMatrix::new(2, 3, vec![1.0, -0.5, 1.0 / 3.0, 0.0, 2e-17, 7.25]).unwrap();
        let parsed = parse_matrix_csv(&matrix_to_csv(&x)).unwrap();
        assert_eq!(x, parsed);
    }

    #[test]
    fn parse_reports_position_of_bad_token() {
        let err = parse_matrix_csv("1,2\n3,x\n").unwrap_err();
        assert!(matches!(err, IoError::Parse { line: 2, .. }));
    }

    #[test]
    fn parse_rejects_ragged_rows() {
        let err = parse_matrix_csv("1,2\n3\n").unwrap_err();
        assert!(matches!(
            err,
            IoError::Ragged {
                line: 2,
                expected: 2,
                found: 1
            }
        ));
    }

    #[test]
    fn parse_skips_blank_lines_and_trims() {
        let x = parse_matrix_csv("\n 1 , 2 \n\n3,4\n").unwrap();
        assert_eq!(x.entries(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(parse_matrix_csv("\n\n"), Err(IoError::Empty)));
    }
}
