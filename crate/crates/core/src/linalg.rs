//! Dense linear algebra helpers.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Minimum-norm least-squares solution of `a x = b`, where `a` is given row-major.
///
/// Singular values below `1e-12 * sigma_max` are treated as zero.
pub fn min_norm_solve(a: &[Vec<f64>], b: &[f64]) -> Result<Vec<f64>> {
    let rows = a.len();
    let cols = a.first().map_or(0, Vec::len);
    if rows != b.len() {
        return Err(Error::InvalidInput(format!(
            "system has {rows} rows but right-hand side has {} entries",
            b.len()
        )));
    }
    let m = DMatrix::from_fn(rows, cols, |r, c| a[r][c]);
    let rhs = DVector::from_column_slice(b);
    let svd = m.svd(true, true);
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    let eps = (sigma_max * 1e-12).max(f64::MIN_POSITIVE);
    let x = svd
        .solve(&rhs, eps)
        .map_err(|e| Error::Numerical(e.to_string()))?;
    Ok(x.iter().copied().collect())
}

/// Solves the square system `a x = b` by Gaussian elimination with partial
/// pivoting. Returns `None` when a pivot falls below `pivot_tol` relative to the
/// largest entry of `a`.
pub fn solve_square(a: &[Vec<f64>], b: &[f64], pivot_tol: f64) -> Option<Vec<f64>> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(row, &rhs)| {
            let mut r = row.clone();
            r.push(rhs);
            r
        })
        .collect();
    let scale = a
        .iter()
        .flatten()
        .fold(0.0_f64, |acc, x| acc.max(x.abs()))
        .max(f64::MIN_POSITIVE);

    for col in 0..n {
        let pivot_row = (col..n).max_by(|&x, &y| {
            m[x][col]
                .abs()
                .partial_cmp(&m[y][col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if m[pivot_row][col].abs() <= pivot_tol * scale {
            return None;
        }
        m.swap(col, pivot_row);
        for r in col + 1..n {
            let factor = m[r][col] / m[col][col];
            if factor != 0.0 {
                for k in col..=n {
                    m[r][k] -= factor * m[col][k];
                }
            }
        }
    }

    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let tail: f64 = (r + 1..n).map(|k| m[r][k] * x[k]).sum();
        x[r] = (m[r][n] - tail) / m[r][r];
    }
    Some(x)
}
