//! Plain-text matrix/vector files and the JSON layout sidecar.
//!
//! Matrices are written row-major as comma-separated reals with no header.
//! Vectors are a single column. Values use Rust's shortest round-trip float
//! formatting, so parsing a written file reproduces every bit.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::block::{BlockLayout, BlockedMatrix};
use crate::error::{BompError, Result};

/// `{"m": rows, "M": num_blocks, "d": block_width}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayoutSidecar {
    pub m: usize,
    #[serde(rename = "M")]
    pub num_blocks: usize,
    pub d: usize,
}

impl LayoutSidecar {
    pub fn of(matrix: &BlockedMatrix) -> Self {
        Self {
            m: matrix.rows(),
            num_blocks: matrix.layout().num_blocks(),
            d: matrix.layout().block_width(),
        }
    }

    pub fn layout(&self) -> Result<BlockLayout> {
        BlockLayout::new(self.num_blocks, self.d)
    }
}

pub fn format_matrix_csv(matrix: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..matrix.nrows() {
        let row: Vec<String> = (0..matrix.ncols())
            .map(|j| format!("{}", matrix[(i, j)]))
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn format_vector_csv(vector: &DVector<f64>) -> String {
    vector.iter().map(|v| format!("{v}\n")).collect()
}

pub fn parse_matrix_csv(text: &str) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|field| {
                field.trim().parse::<f64>().map_err(|e| {
                    BompError::Parse(format!("line {}: '{}': {e}", line_no + 1, field.trim()))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(BompError::Parse(format!(
                    "line {}: expected {} fields, found {}",
                    line_no + 1,
                    first.len(),
                    row.len()
                )));
            }
        }
        rows.push(row);
    }
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    Ok(DMatrix::from_row_iterator(
        nrows,
        ncols,
        rows.into_iter().flatten(),
    ))
}

/// Accepts a single column or a single row.
pub fn parse_vector_csv(text: &str) -> Result<DVector<f64>> {
    let m = parse_matrix_csv(text)?;
    match m.shape() {
        (_, 1) | (0, 0) => Ok(DVector::from_iterator(m.nrows(), m.iter().copied())),
        (1, n) => Ok(DVector::from_iterator(n, m.iter().copied())),
        (r, c) => Err(BompError::Parse(format!(
            "expected a vector, found a {r}x{c} table"
        ))),
    }
}

pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    parse_matrix_csv(&read_text(path.as_ref())?)
}

pub fn read_vector_csv(path: impl AsRef<Path>) -> Result<DVector<f64>> {
    parse_vector_csv(&read_text(path.as_ref())?)
}

pub fn write_matrix_csv(path: impl AsRef<Path>, matrix: &DMatrix<f64>) -> Result<()> {
    fs::write(path, format_matrix_csv(matrix))?;
    Ok(())
}

pub fn write_vector_csv(path: impl AsRef<Path>, vector: &DVector<f64>) -> Result<()> {
    fs::write(path, format_vector_csv(vector))?;
    Ok(())
}

pub fn read_layout(path: impl AsRef<Path>) -> Result<LayoutSidecar> {
    Ok(serde_json::from_str(&read_text(path.as_ref())?)?)
}

pub fn write_layout(path: impl AsRef<Path>, sidecar: &LayoutSidecar) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(sidecar)?)?;
    Ok(())
}

/// Loads a matrix CSV and checks it against its layout sidecar.
pub fn load_blocked_matrix(
    matrix_path: impl AsRef<Path>,
    layout_path: impl AsRef<Path>,
) -> Result<BlockedMatrix> {
    let entries = read_matrix_csv(matrix_path)?;
    let sidecar = read_layout(layout_path)?;
    if entries.nrows() != sidecar.m {
        return Err(BompError::DimensionMismatch(format!(
            "matrix file has {} rows, layout says m={}",
            entries.nrows(),
            sidecar.m
        )));
    }
    BlockedMatrix::new(entries, sidecar.layout()?)
}

pub fn save_blocked_matrix(
    matrix: &BlockedMatrix,
    matrix_path: impl AsRef<Path>,
    layout_path: impl AsRef<Path>,
) -> Result<()> {
    write_matrix_csv(matrix_path, matrix.entries())?;
    write_layout(layout_path, &LayoutSidecar::of(matrix))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| BompError::Io(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sidecar_uses_capital_m() {
        let s = LayoutSidecar {
            m: 4,
            num_blocks: 3,
            d: 2,
        };
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(json, r#"{"m":4,"M":3,"d":2}"#);
        let back: LayoutSidecar = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn ragged_rows_rejected() {
        assert!(parse_matrix_csv("1,2\n3\n").is_err());
        assert!(parse_matrix_csv("1,x\n").is_err());
    }

    #[test]
    fn vector_accepts_row_or_column() {
        assert_eq!(parse_vector_csv("1\n2\n3\n").unwrap().len(), 3);
        assert_eq!(parse_vector_csv("1,2,3\n").unwrap().len(), 3);
        assert!(parse_vector_csv("1,2\n3,4\n").is_err());
    }

    #[test]
    fn files_round_trip_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let layout = BlockLayout::new(2, 2).unwrap();
        let a = DMatrix::from_fn(3, 4, |i, j| (i as f64 + 1.0) / (j as f64 + 3.0));
        let bm = BlockedMatrix::new(a, layout).unwrap();
        let (mp, lp) = (dir.path().join("A.csv"), dir.path().join("A.json"));
        save_blocked_matrix(&bm, &mp, &lp).unwrap();
        assert_eq!(load_blocked_matrix(&mp, &lp).unwrap(), bm);

        let bad = dir.path().join("bad.json");
        write_layout(
            &bad,
            &LayoutSidecar {
                m: 5,
                num_blocks: 2,
                d: 2,
            },
        )
        .unwrap();
        assert!(load_blocked_matrix(&mp, &bad).is_err());
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_bit_exact(
            values in prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::ZERO, 1..40),
            cols in 1usize..5,
        ) {
            let rows = values.len() / cols;
            prop_assume!(rows > 0);
            let m = DMatrix::from_row_slice(rows, cols, &values[..rows * cols]);
            let back = parse_matrix_csv(&format_matrix_csv(&m)).unwrap();
            prop_assert_eq!(back.shape(), m.shape());
            for (a, b) in back.iter().zip(m.iter()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
