//! Scalar statistics: Cronbach's alpha, Pearson's r and boxplot descriptives.

use serde::{Deserialize, Serialize};

use super::{ResponseMatrix, StatsError};

/// Divisor used for variances.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarianceConvention {
    /// Divide by `n - 1`.
    Sample,
    /// Divide by `n`.
    Population,
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn variance(values: &[f64], convention: VarianceConvention) -> f64 {
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    let divisor = match convention {
        VarianceConvention::Sample => values.len() as f64 - 1.0,
        VarianceConvention::Population => values.len() as f64,
    };
    ss / divisor
}

/// Cronbach's alpha of a rows-by-items matrix using sample variances.
///
/// ```
/// use dialogsim::psychometrics::{cronbach_alpha, ResponseMatrix};
///
/// let m = ResponseMatrix::from_rows(vec![
///     vec![1.0, 2.0],
///     vec![2.0, 3.0],
///     vec![3.0, 5.0],
///     vec![4.0, 4.0],
/// ])
/// .unwrap();
/// let alpha = cronbach_alpha(&m).unwrap();
/// assert!((alpha - 8.0 / 9.0).abs() < 1e-12);
/// ```
pub fn cronbach_alpha(matrix: &ResponseMatrix) -> Result<f64, StatsError> {
    cronbach_alpha_with(matrix, VarianceConvention::Sample)
}

/// Cronbach's alpha with an explicit variance convention. The convention
/// cancels in the variance ratio, so both give the same value up to rounding.
pub fn cronbach_alpha_with(matrix: &ResponseMatrix, convention: VarianceConvention) -> Result<f64, StatsError> {
    let k = matrix.column_count();
    if k < 2 {
        return Err(StatsError::TooFewItems(k));
    }
    let n = matrix.row_count();
    if n < 2 {
        return Err(StatsError::TooFewRows(n));
    }
    let item_variance_sum: f64 = (0..k)
        .map(|j| variance(&matrix.column(j), convention))
        .sum();
    let totals: Vec<f64> = matrix.values().iter().map(|row| row.iter().sum()).collect();
    let total_variance = variance(&totals, convention);
    if total_variance <= 0.0 {
        return Err(StatsError::ZeroTotalVariance);
    }
    let k = k as f64;
    Ok(k / (k - 1.0) * (1.0 - item_variance_sum / total_variance))
}

/// Sample Pearson correlation coefficient.
///
/// Constant series have no defined correlation and produce an error rather
/// than zero.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(StatsError::TooFewRows(x.len()));
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::ConstantSeries);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Five-number summary plus mean and standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Descriptives {
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    /// Sample standard deviation; absent for a single value.
    pub sd: Option<f64>,
    pub q1: f64,
    pub q3: f64,
    pub min: f64,
    pub max: f64,
}

/// Quantile by linear interpolation between closest ranks of sorted data.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn descriptives(values: &[f64]) -> Result<Descriptives, StatsError> {
    if values.is_empty() {
        return Err(StatsError::Empty);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(Descriptives {
        n: values.len(),
        mean: mean(values),
        median: quantile(&sorted, 0.5),
        sd: (values.len() >= 2).then(|| variance(values, VarianceConvention::Sample).sqrt()),
        q1: quantile(&sorted, 0.25),
        q3: quantile(&sorted, 0.75),
        min: sorted[0],
        max: sorted[sorted.len() - 1],
    })
}
