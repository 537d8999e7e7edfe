//! Aggregate statistics over per-network results: RMSE, Pearson correlation,
//! simple least-squares regression, and one-way repeated-measures ANOVA.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("need at least {minimum} observations, got {actual}")]
    InsufficientData { minimum: usize, actual: usize },
    #[error("paired vectors differ in length: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("{name} has zero variance")]
    ZeroVariance { name: &'static str },
}

/// Root mean squared error of a residual vector.
pub fn network_rmse(residuals: &[f64]) -> f64 {
    assert!(!residuals.is_empty(), "rmse of an empty residual vector");
    let sum: f64 = residuals.iter().map(|r| r * r).sum();
    (sum / residuals.len() as f64).sqrt()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn is_constant(v: &[f64]) -> bool {
    v.iter().all(|&x| x == v[0])
}

/// Product-moment correlation of two equal-length vectors.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch { left: x.len(), right: y.len() });
    }
    if x.len() < 3 {
        return Err(StatsError::InsufficientData { minimum: 3, actual: x.len() });
    }
    if is_constant(x) {
        return Err(StatsError::ZeroVariance { name: "x" });
    }
    if is_constant(y) {
        return Err(StatsError::ZeroVariance { name: "y" });
    }
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        let (dx, dy) = (xi - mx, yi - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Coefficients of the least-squares line `y = slope * x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    pub slope: f64,
    pub intercept: f64,
}

/// Simple linear regression of `y` on `x`.
pub fn ols_fit(x: &[f64], y: &[f64]) -> Result<OlsFit, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch { left: x.len(), right: y.len() });
    }
    if x.len() < 3 {
        return Err(StatsError::InsufficientData { minimum: 3, actual: x.len() });
    }
    if is_constant(x) {
        return Err(StatsError::ZeroVariance { name: "x" });
    }
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        sxy += (xi - mx) * (yi - my);
        sxx += (xi - mx) * (xi - mx);
    }
    let slope = sxy / sxx;
    Ok(OlsFit { slope, intercept: my - slope * mx })
}

/// Result of the repeated-measures ANOVA, with sentinels for the two
/// degenerate cases a perfectly regular error matrix can produce.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnovaOutcome {
    /// A finite F ratio with its p-value.
    Statistic { f: f64, df1: usize, df2: usize, p: f64 },
    /// Zero error term with nonzero condition effect: F diverges.
    Infinite { df1: usize, df2: usize },
    /// No variance anywhere: the ratio is 0/0.
    NotSignificant { df1: usize, df2: usize },
}

impl AnovaOutcome {
    /// The p-value when the statistic is finite; the sentinels map to 0
    /// (infinite F) and 1 (no effect).
    pub fn p_value(&self) -> f64 {
        match *self {
            AnovaOutcome::Statistic { p, .. } => p,
            AnovaOutcome::Infinite { .. } => 0.0,
            AnovaOutcome::NotSignificant { .. } => 1.0,
        }
    }
}

/// One-way repeated-measures ANOVA: rows are subjects (networks), columns
/// conditions (calculi). Partitions total variation into condition, subject,
/// and error components; `F = MS_condition / MS_error` on
/// `(k-1, (k-1)(n-1))` degrees of freedom.
pub fn rm_anova(matrix: &[Vec<f64>]) -> Result<AnovaOutcome, StatsError> {
    let n = matrix.len();
    if n < 2 {
        return Err(StatsError::InsufficientData { minimum: 2, actual: n });
    }
    let k = matrix[0].len();
    if k < 2 {
        return Err(StatsError::InsufficientData { minimum: 2, actual: k });
    }
    for row in matrix {
        if row.len() != k {
            return Err(StatsError::LengthMismatch { left: k, right: row.len() });
        }
    }

    let grand = matrix.iter().flatten().sum::<f64>() / (n * k) as f64;
    let subject_means: Vec<f64> = matrix.iter().map(|row| mean(row)).collect();
    let condition_means: Vec<f64> = (0..k)
        .map(|j| matrix.iter().map(|row| row[j]).sum::<f64>() / n as f64)
        .collect();

    let ss_total: f64 = matrix
        .iter()
        .flatten()
        .map(|&x| (x - grand) * (x - grand))
        .sum();
    let ss_condition: f64 =
        n as f64 * condition_means.iter().map(|&m| (m - grand) * (m - grand)).sum::<f64>();
    let ss_subject: f64 =
        k as f64 * subject_means.iter().map(|&m| (m - grand) * (m - grand)).sum::<f64>();
    let ss_error = (ss_total - ss_condition - ss_subject).max(0.0);

    let df1 = k - 1;
    let df2 = (k - 1) * (n - 1);

    // A structurally zero component only cancels to ~1e-16 relative in
    // floating point; resolve the sentinels against total variation.
    let tolerance = 1e-12 * ss_total.max(f64::MIN_POSITIVE);
    if ss_error <= tolerance {
        return Ok(if ss_condition <= tolerance {
            AnovaOutcome::NotSignificant { df1, df2 }
        } else {
            AnovaOutcome::Infinite { df1, df2 }
        });
    }

    let f = (ss_condition / df1 as f64) / (ss_error / df2 as f64);
    let dist = FisherSnedecor::new(df1 as f64, df2 as f64)
        .expect("degrees of freedom are positive");
    let p = dist.sf(f);
    Ok(AnovaOutcome::Statistic { f, df1, df2, p })
}

/// Full correlation matrix of the given columns; symmetric with unit
/// diagonal by construction.
pub fn correlation_matrix(columns: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, StatsError> {
    let m = columns.len();
    let mut matrix = vec![vec![1.0; m]; m];
    for i in 0..m {
        for j in (i + 1)..m {
            let r = pearson(&columns[i], &columns[j])?;
            matrix[i][j] = r;
            matrix[j][i] = r;
        }
    }
    Ok(matrix)
}
