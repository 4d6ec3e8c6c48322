//! Ordinary least squares with the interaction design
//! `smoothness ~ 1 + distance + intervals + distance*intervals`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::stats::special::student_t_two_sided_p;
use crate::stats::TrialRecord;

pub const COLUMN_NAMES: [&str; 4] = ["intercept", "distance", "intervals", "interaction"];

/// Fitted regression: coefficients with their uncertainty and fit quality.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OlsResult {
    pub coefficients: [f64; 4],
    pub std_errors: [f64; 4],
    pub t_stats: [f64; 4],
    pub p_values: [f64; 4],
    pub r_squared: f64,
    pub n: usize,
    pub dof: usize,
}

/// Solves A x = b for a small symmetric positive-definite system by Gaussian
/// elimination with partial pivoting. Reports the first rank-deficient
/// column on failure.
fn solve4(mut a: [[f64; 4]; 4], mut b: [f64; 4]) -> Result<[f64; 4]> {
    let scale = a
        .iter()
        .flatten()
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
        .max(1e-300);
    for col in 0..4 {
        let pivot_row = (col..4)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("non-empty range");
        if a[pivot_row][col].abs() < 1e-12 * scale {
            return Err(Error::Analysis(format!(
                "design matrix is rank deficient: column {:?} is collinear with earlier columns",
                COLUMN_NAMES[col]
            )));
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for row in col + 1..4 {
            let factor = a[row][col] / a[col][col];
            for k in col..4 {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = [0.0; 4];
    for row in (0..4).rev() {
        let mut acc = b[row];
        for k in row + 1..4 {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Ok(x)
}

fn invert4(a: [[f64; 4]; 4]) -> Result<[[f64; 4]; 4]> {
    let mut inv = [[0.0; 4]; 4];
    for col in 0..4 {
        let mut e = [0.0; 4];
        e[col] = 1.0;
        let x = solve4(a, e)?;
        for row in 0..4 {
            inv[row][col] = x[row];
        }
    }
    Ok(inv)
}

/// Fits the interaction model to raw (distance, intervals, response) points
/// by solving the normal equations. Standard errors come from
/// `s^2 (X^T X)^-1` with `s^2 = RSS / (n - 4)`; p-values are two-sided
/// Student-t tails.
pub fn ols_fit_points(points: &[(f64, f64, f64)]) -> Result<OlsResult> {
    let n = points.len();
    if n < 5 {
        return Err(Error::Validation(format!(
            "OLS with 4 coefficients needs at least 5 observations, got {n}"
        )));
    }
    let design =
        |&(d, k, _): &(f64, f64, f64)| -> [f64; 4] { [1.0, d, k, d * k] };

    let mut xtx = [[0.0; 4]; 4];
    let mut xty = [0.0; 4];
    for p in points {
        let row = design(p);
        for i in 0..4 {
            for j in 0..4 {
                xtx[i][j] += row[i] * row[j];
            }
            xty[i] += row[i] * p.2;
        }
    }
    let beta = solve4(xtx, xty)?;
    let xtx_inv = invert4(xtx)?;

    let mut rss = 0.0;
    let mut mean_y = 0.0;
    for p in points {
        mean_y += p.2 / n as f64;
    }
    let mut tss = 0.0;
    for p in points {
        let row = design(p);
        let fitted: f64 = row.iter().zip(&beta).map(|(x, b)| x * b).sum();
        rss += (p.2 - fitted) * (p.2 - fitted);
        tss += (p.2 - mean_y) * (p.2 - mean_y);
    }
    if tss <= 0.0 {
        return Err(Error::Analysis(
            "response is constant; R^2 is undefined".into(),
        ));
    }
    let dof = n - 4;
    let s2 = rss / dof as f64;

    let mut std_errors = [0.0; 4];
    let mut t_stats = [0.0; 4];
    let mut p_values = [0.0; 4];
    for i in 0..4 {
        std_errors[i] = (s2 * xtx_inv[i][i]).sqrt();
        t_stats[i] = beta[i] / std_errors[i];
        p_values[i] = student_t_two_sided_p(t_stats[i], dof as f64)?;
    }

    Ok(OlsResult {
        coefficients: beta,
        std_errors,
        t_stats,
        p_values,
        r_squared: 1.0 - rss / tss,
        n,
        dof,
    })
}

/// Fits the interaction model to sweep records.
pub fn ols_fit(records: &[TrialRecord]) -> Result<OlsResult> {
    let points: Vec<(f64, f64, f64)> = records
        .iter()
        .map(|r| (r.distance_sd, r.n_points as f64, r.smoothness))
        .collect();
    ols_fit_points(&points)
}
