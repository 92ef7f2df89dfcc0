//! Summary statistics and goodness-of-fit for per-trial counts.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, Poisson};

use crate::error::{Error, Result};
use crate::special::CompensatedSum;

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub variance: f64,
    pub samples: u64,
}

impl MeanEstimate {
    /// Accumulates in slice order, so equal inputs give equal bits.
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return MeanEstimate { mean: f64::NAN, stderr: f64::NAN, variance: f64::NAN, samples: 0 };
        }
        let mean = values.iter().copied().collect::<CompensatedSum>().value() / n as f64;
        let variance = if n > 1 {
            values.iter().map(|x| (x - mean) * (x - mean)).collect::<CompensatedSum>().value()
                / (n - 1) as f64
        } else {
            0.0
        };
        MeanEstimate { mean, stderr: (variance / n as f64).sqrt(), variance, samples: n as u64 }
    }

    pub fn from_counts(values: &[u64]) -> Self {
        Self::from_values(&values.iter().map(|&v| v as f64).collect::<Vec<_>>())
    }

    /// `|mean − target| ≤ rel · |target|`.
    pub fn within_relative(&self, target: f64, rel: f64) -> bool {
        (self.mean - target).abs() <= rel * target.abs()
    }
}

/// `P(Po(λ) = k)`, with `Po(0)` the point mass at zero.
pub fn poisson_pmf(lambda: f64, k: u64) -> Result<f64> {
    if lambda == 0.0 {
        return Ok(if k == 0 { 1.0 } else { 0.0 });
    }
    let d = Poisson::new(lambda)
        .map_err(|e| Error::domain("poisson_pmf", format!("lambda = {lambda}: {e}")))?;
    Ok(d.pmf(k))
}

/// Half the L1 distance between the empirical law of `values` and `Po(λ)`.
pub fn tv_distance_poisson(values: &[u64], lambda: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::domain("tv_distance_poisson", "no samples"));
    }
    let max = values.iter().copied().max().unwrap_or(0) as usize;
    let mut freq = vec![0u64; max + 1];
    for &v in values {
        freq[v as usize] += 1;
    }
    let total = values.len() as f64;
    let mut diff = CompensatedSum::new();
    let mut covered = CompensatedSum::new();
    for (k, &f) in freq.iter().enumerate() {
        let pk = poisson_pmf(lambda, k as u64)?;
        covered.add(pk);
        diff.add((f as f64 / total - pk).abs());
    }
    // empirical mass is zero above max
    diff.add((1.0 - covered.value()).max(0.0));
    Ok(0.5 * diff.value())
}

/// Empirical `E[(Y)_r]`, the mean of the falling factorial `Y(Y−1)…(Y−r+1)`.
pub fn factorial_moment(values: &[u64], r: u32) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let sum: CompensatedSum = values
        .iter()
        .map(|&v| (0..r as u64).map(|q| v as f64 - q as f64).product::<f64>().max(0.0))
        .collect();
    sum.value() / values.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub df: u64,
    pub p_value: f64,
    /// Upper `1 − significance` quantile of `χ²(df)`.
    pub critical_value: f64,
    pub significance: f64,
    pub passed: bool,
}

/// Pearson chi-square of `observed` against `expected` with `df` degrees of freedom.
pub fn chi_square(observed: &[u64], expected: &[f64], df: u64, significance: f64) -> Result<ChiSquareTest> {
    if observed.len() != expected.len() || observed.is_empty() {
        return Err(Error::domain("chi_square", "observed and expected must be equal-length and nonempty"));
    }
    if expected.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::domain("chi_square", "expected counts must be positive"));
    }
    if df == 0 || !(0.0..1.0).contains(&significance) {
        return Err(Error::domain("chi_square", format!("bad df {df} or significance {significance}")));
    }
    let statistic = observed
        .iter()
        .zip(expected)
        .map(|(&o, &e)| (o as f64 - e).powi(2) / e)
        .collect::<CompensatedSum>()
        .value();
    let dist = ChiSquared::new(df as f64).map_err(|e| Error::domain("chi_square", e.to_string()))?;
    let p_value = dist.sf(statistic);
    let critical_value = dist.inverse_cdf(1.0 - significance);
    Ok(ChiSquareTest {
        statistic,
        df,
        p_value,
        critical_value,
        significance,
        passed: statistic <= critical_value,
    })
}
