//! Ordinary least squares with classical standard errors.

use serde::{Deserialize, Serialize};

use super::dist::t_two_sided;
use super::StatsError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub name: String,
    pub value: f64,
    pub std_err: f64,
    pub t: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    pub coefficients: Vec<Coefficient>,
    pub r_squared: f64,
    pub n: usize,
    pub df_resid: usize,
    pub residuals: Vec<f64>,
}

impl OlsFit {
    pub fn get(&self, name: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.name == name)
    }
}

/// Inverts a symmetric positive-definite-ish matrix by Gauss-Jordan
/// elimination with partial pivoting. Fails with the index of the first
/// column whose pivot vanishes.
fn invert(mut a: Vec<Vec<f64>>) -> Result<Vec<Vec<f64>>, usize> {
    let p = a.len();
    let scale = a
        .iter()
        .enumerate()
        .map(|(i, r)| r[i].abs())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let tol = 1e-12 * scale;
    let mut inv: Vec<Vec<f64>> = (0..p)
        .map(|i| (0..p).map(|j| (i == j) as u8 as f64).collect())
        .collect();
    for col in 0..p {
        let pivot = (col..p)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .expect("non-empty range");
        if a[pivot][col].abs() <= tol {
            return Err(col);
        }
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let d = a[col][col];
        for j in 0..p {
            a[col][j] /= d;
            inv[col][j] /= d;
        }
        for row in 0..p {
            if row == col {
                continue;
            }
            let factor = a[row][col];
            if factor == 0.0 {
                continue;
            }
            for j in 0..p {
                a[row][j] -= factor * a[col][j];
                inv[row][j] -= factor * inv[col][j];
            }
        }
    }
    Ok(inv)
}

/// Fits `y ≈ X·b` where `columns` holds the columns of `X` (no implicit
/// intercept). R² is centered on the mean of `y`.
pub fn ols_fit(y: &[f64], columns: &[(String, Vec<f64>)]) -> Result<OlsFit, StatsError> {
    let n = y.len();
    let p = columns.len();
    if p == 0 {
        return Err(StatsError::Degenerate("no regressors".into()));
    }
    if let Some((name, c)) = columns.iter().find(|(_, c)| c.len() != n) {
        return Err(StatsError::Degenerate(format!(
            "column {name} has {} rows, expected {n}",
            c.len()
        )));
    }
    if n <= p {
        return Err(StatsError::Degenerate(format!("{n} observations for {p} parameters")));
    }
    let mut xtx = vec![vec![0.0; p]; p];
    let mut xty = vec![0.0; p];
    for i in 0..p {
        for j in i..p {
            let s: f64 = columns[i].1.iter().zip(&columns[j].1).map(|(a, b)| a * b).sum();
            xtx[i][j] = s;
            xtx[j][i] = s;
        }
        xty[i] = columns[i].1.iter().zip(y).map(|(a, b)| a * b).sum();
    }
    let inv = invert(xtx).map_err(|col| StatsError::RankDeficient {
        column: columns[col].0.clone(),
    })?;
    let beta: Vec<f64> = inv
        .iter()
        .map(|row| row.iter().zip(&xty).map(|(a, b)| a * b).sum())
        .collect();
    let residuals: Vec<f64> = (0..n)
        .map(|r| y[r] - columns.iter().zip(&beta).map(|((_, c), b)| c[r] * b).sum::<f64>())
        .collect();
    let ssr: f64 = residuals.iter().map(|e| e * e).sum();
    let mean = y.iter().sum::<f64>() / n as f64;
    let sst: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    let df_resid = n - p;
    let sigma2 = ssr / df_resid as f64;
    let coefficients = columns
        .iter()
        .enumerate()
        .map(|(i, (name, _))| {
            let std_err = (sigma2 * inv[i][i]).max(0.0).sqrt();
            let t = beta[i] / std_err;
            Coefficient {
                name: name.clone(),
                value: beta[i],
                std_err,
                t,
                p: t_two_sided(t, df_resid as f64),
            }
        })
        .collect();
    Ok(OlsFit {
        coefficients,
        r_squared: if sst > 0.0 { 1.0 - ssr / sst } else { f64::NAN },
        n,
        df_resid,
        residuals,
    })
}
