//! Small helpers shared by the JSON/TOML wire formats.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub(crate) fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

pub(crate) fn rows_to_matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    if rows.is_empty() {
        return Err(Error::Serde(format!("{what}: matrix needs at least one row")));
    }
    let cols = rows[0].len();
    if cols == 0 || rows.iter().any(|r| r.len() != cols) {
        return Err(Error::Serde(format!("{what}: ragged or empty matrix rows")));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

/// Like [`rows_to_matrix`] but an empty list maps to a 0 x `cols` matrix.
pub(crate) fn rows_to_matrix_allow_empty(
    rows: &[Vec<f64>],
    cols: usize,
    what: &str,
) -> Result<DMatrix<f64>> {
    if rows.is_empty() {
        return Ok(DMatrix::zeros(0, cols));
    }
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::Serde(format!("{what}: rows must have {cols} entries")));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

pub(crate) fn vector_to_vec(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}
