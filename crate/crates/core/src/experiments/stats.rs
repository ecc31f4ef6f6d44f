//! Confidence intervals and least-squares fits over sweep results.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

pub const CI_LEVEL: f64 = 0.90;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CiResult {
    pub mean: f64,
    pub half_width: f64,
    pub level: f64,
    pub n: usize,
}

impl CiResult {
    pub fn lo(&self) -> f64 {
        self.mean - self.half_width
    }

    pub fn hi(&self) -> f64 {
        self.mean + self.half_width
    }
}

/// Two-sided 90% Student-t interval on the mean.
pub fn ci90(xs: &[f64]) -> Result<CiResult> {
    let n = xs.len();
    if n < 2 {
        return Err(Error::Stats(format!(
            "confidence interval needs at least 2 values, got {n}"
        )));
    }
    if xs.iter().all(|&x| x == xs[0]) {
        return Ok(CiResult {
            mean: xs[0],
            half_width: 0.0,
            level: CI_LEVEL,
            n,
        });
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .map_err(|e| Error::Stats(e.to_string()))?
        .inverse_cdf(1.0 - (1.0 - CI_LEVEL) / 2.0);
    Ok(CiResult {
        mean,
        half_width: t * var.sqrt() / (n as f64).sqrt(),
        level: CI_LEVEL,
        n,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expansion {
    #[default]
    Linear,
    /// Squares and pairwise products of the features.
    Quadratic,
    /// Squares only.
    PureQuadratic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub expansion: Expansion,
    /// Names of the expanded columns, intercept first.
    pub feature_names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub r_squared: f64,
    pub n: usize,
    /// The design matrix was rank deficient; coefficients are the
    /// minimum-norm least-squares solution.
    pub rank_deficient: bool,
    /// Means and standard deviations used to standardize the raw features.
    pub feature_means: Vec<f64>,
    pub feature_sds: Vec<f64>,
}

fn expand(names: &[String], row: &[f64], expansion: Expansion) -> (Vec<String>, Vec<f64>) {
    let mut out_names = vec!["intercept".to_string()];
    let mut out = vec![1.0];
    out_names.extend(names.iter().cloned());
    out.extend_from_slice(row);
    match expansion {
        Expansion::Linear => {}
        Expansion::PureQuadratic => {
            for (i, x) in row.iter().enumerate() {
                out_names.push(format!("{}^2", names[i]));
                out.push(x * x);
            }
        }
        Expansion::Quadratic => {
            for i in 0..row.len() {
                for j in i..row.len() {
                    out_names.push(if i == j {
                        format!("{}^2", names[i])
                    } else {
                        format!("{}*{}", names[i], names[j])
                    });
                    out.push(row[i] * row[j]);
                }
            }
        }
    }
    (out_names, out)
}

/// Ordinary least squares of `y` on standardized features with an
/// intercept. Returns R² on the training data.
pub fn ols_fit(
    names: &[&str],
    x: &[Vec<f64>],
    y: &[f64],
    expansion: Expansion,
) -> Result<RegressionFit> {
    let n = y.len();
    if x.len() != n {
        return Err(Error::Stats(format!(
            "{} feature rows for {n} observations",
            x.len()
        )));
    }
    let p = names.len();
    if let Some(bad) = x.iter().position(|r| r.len() != p) {
        return Err(Error::Stats(format!(
            "row {bad} has {} features, expected {p}",
            x[bad].len()
        )));
    }
    if x.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Stats("non-finite observation".into()));
    }
    let means: Vec<f64> = (0..p)
        .map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n.max(1) as f64)
        .collect();
    let sds: Vec<f64> = (0..p)
        .map(|j| {
            (x.iter().map(|r| (r[j] - means[j]).powi(2)).sum::<f64>() / n.max(1) as f64).sqrt()
        })
        .collect();
    let names: Vec<String> = names.iter().map(|s| s.to_string()).collect();
    let mut feature_names = Vec::new();
    let rows: Vec<Vec<f64>> = x
        .iter()
        .map(|r| {
            let z: Vec<f64> = (0..p)
                .map(|j| {
                    if sds[j] > 0.0 {
                        (r[j] - means[j]) / sds[j]
                    } else {
                        0.0
                    }
                })
                .collect();
            let (nm, row) = expand(&names, &z, expansion);
            feature_names = nm;
            row
        })
        .collect();
    let cols = expand(&names, &vec![0.0; p], expansion).1.len();
    if n < cols {
        return Err(Error::Stats(format!(
            "{n} observations for {cols} expanded columns"
        )));
    }
    let design = DMatrix::from_fn(n, cols, |i, j| rows[i][j]);
    let target = DVector::from_column_slice(y);
    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let tol = smax * f64::EPSILON * n.max(cols) as f64;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    let beta = svd
        .solve(&target, tol)
        .map_err(|e| Error::Stats(e.to_string()))?;
    let fitted = &design * &beta;
    let mean_y = y.iter().sum::<f64>() / n as f64;
    let sst: f64 = y.iter().map(|v| (v - mean_y).powi(2)).sum();
    if sst <= 0.0 {
        return Err(Error::Stats(
            "response has zero variance; R² undefined".into(),
        ));
    }
    let ssr: f64 = y
        .iter()
        .zip(fitted.iter())
        .map(|(a, b)| (a - b).powi(2))
        .sum();
    Ok(RegressionFit {
        expansion,
        feature_names,
        coefficients: beta.iter().copied().collect(),
        r_squared: 1.0 - ssr / sst,
        n,
        rank_deficient: rank < cols,
        feature_means: means,
        feature_sds: sds,
    })
}
