//! Goodness-of-fit statistics used by the diagnostics.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Kolmogorov–Smirnov distance between the empirical law of `samples` and
/// `Normal(mean, sd²)`. Ties (lattice-valued samples) are handled exactly.
pub fn ks_normal(samples: &[f64], mean: f64, sd: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::domain("KS distance of an empty sample"));
    }
    let normal = Normal::new(mean, sd).map_err(|e| Error::domain(e.to_string()))?;
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = normal.cdf(x);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    Ok(d)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

impl ChiSquareResult {
    fn from_statistic(statistic: f64, dof: usize) -> Result<Self> {
        let p_value = if dof == 0 {
            1.0
        } else {
            ChiSquared::new(dof as f64)
                .map_err(|e| Error::domain(e.to_string()))?
                .sf(statistic)
        };
        Ok(ChiSquareResult {
            statistic,
            dof,
            p_value,
        })
    }
}

/// Pearson goodness of fit of `counts` to `probs`.
///
/// Categories of zero probability must have zero count (otherwise the fit is
/// rejected outright with `p = 0`) and do not contribute degrees of freedom.
pub fn chi_square_gof(counts: &[u64], probs: &[f64]) -> Result<ChiSquareResult> {
    if counts.len() != probs.len() {
        return Err(Error::DimensionMismatch {
            expected: probs.len(),
            found: counts.len(),
        });
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::domain("goodness of fit on zero observations"));
    }
    let mut statistic = 0.0;
    let mut categories = 0usize;
    for (&c, &p) in counts.iter().zip(probs) {
        if p <= 0.0 {
            if c > 0 {
                return Ok(ChiSquareResult {
                    statistic: f64::INFINITY,
                    dof: categories,
                    p_value: 0.0,
                });
            }
            continue;
        }
        let expected = p * total as f64;
        statistic += (c as f64 - expected).powi(2) / expected;
        categories += 1;
    }
    ChiSquareResult::from_statistic(statistic, categories.saturating_sub(1))
}

/// Pearson test of independence for a contingency table; empty rows and
/// columns are dropped.
pub fn chi_square_independence(table: &[Vec<u64>]) -> Result<ChiSquareResult> {
    let cols = table.first().map_or(0, Vec::len);
    if table.iter().any(|r| r.len() != cols) {
        return Err(Error::domain("contingency table rows differ in length"));
    }
    let row_sums: Vec<u64> = table.iter().map(|r| r.iter().sum()).collect();
    let col_sums: Vec<u64> = (0..cols).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    let total: u64 = row_sums.iter().sum();
    if total == 0 {
        return Err(Error::domain("independence test on an empty table"));
    }
    let mut statistic = 0.0;
    for (i, row) in table.iter().enumerate() {
        if row_sums[i] == 0 {
            continue;
        }
        for (j, &obs) in row.iter().enumerate() {
            if col_sums[j] == 0 {
                continue;
            }
            let expected = row_sums[i] as f64 * col_sums[j] as f64 / total as f64;
            statistic += (obs as f64 - expected).powi(2) / expected;
        }
    }
    let r = row_sums.iter().filter(|&&s| s > 0).count();
    let c = col_sums.iter().filter(|&&s| s > 0).count();
    ChiSquareResult::from_statistic(statistic, r.saturating_sub(1) * c.saturating_sub(1))
}

/// Empirical `q`-quantile (linear interpolation between order statistics).
pub fn quantile(samples: &[f64], q: f64) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    if xs.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (xs.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    xs[lo] + (pos - lo as f64) * (xs[hi] - xs[lo])
}
