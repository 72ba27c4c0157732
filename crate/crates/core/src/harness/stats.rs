//! Paired t-test with an embedded two-tailed critical-value table.

use super::HarnessError;

/// Two-tailed critical values of Student's t for df = 1..=30 at
/// alpha = 0.05 and alpha = 0.01.
const CRITICAL: [(f64, f64); 30] = [
    (12.706, 63.657),
    (4.303, 9.925),
    (3.182, 5.841),
    (2.776, 4.604),
    (2.571, 4.032),
    (2.447, 3.707),
    (2.365, 3.499),
    (2.306, 3.355),
    (2.262, 3.250),
    (2.228, 3.169),
    (2.201, 3.106),
    (2.179, 3.055),
    (2.160, 3.012),
    (2.145, 2.977),
    (2.131, 2.947),
    (2.120, 2.921),
    (2.110, 2.898),
    (2.101, 2.878),
    (2.093, 2.861),
    (2.086, 2.845),
    (2.080, 2.831),
    (2.074, 2.819),
    (2.069, 2.807),
    (2.064, 2.797),
    (2.060, 2.787),
    (2.056, 2.779),
    (2.052, 2.771),
    (2.048, 2.763),
    (2.045, 2.756),
    (2.042, 2.750),
];

pub const SIGNIFICANCE_LEVELS: [f64; 2] = [0.05, 0.01];

/// Two-tailed critical value. Degrees of freedom above 30 use the df = 30
/// row, which is conservative.
pub fn critical_value(df: usize, alpha: f64) -> Option<f64> {
    if df == 0 {
        return None;
    }
    let (c05, c01) = CRITICAL[df.min(30) - 1];
    if alpha == 0.05 {
        Some(c05)
    } else if alpha == 0.01 {
        Some(c01)
    } else {
        None
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TTestResult {
    pub t: f64,
    pub df: usize,
    pub n: usize,
    pub mean_difference: f64,
    /// Levels from {0.05, 0.01} at which the null hypothesis is rejected.
    pub significant_at: Vec<f64>,
}

impl TTestResult {
    pub fn is_significant(&self, alpha: f64) -> bool {
        self.significant_at.contains(&alpha)
    }
}

/// Paired t statistic on `before[i] - after[i]`, sample standard deviation
/// with an n - 1 denominator.
pub fn paired_t_test(before: &[f64], after: &[f64]) -> Result<TTestResult, HarnessError> {
    if before.len() != after.len() {
        return Err(HarnessError::LengthMismatch { left: before.len(), right: after.len() });
    }
    let n = before.len();
    if n < 2 {
        return Err(HarnessError::TooFewSamples { n });
    }
    let diffs: Vec<f64> = before.iter().zip(after).map(|(b, a)| b - a).collect();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    if sd == 0.0 {
        return Err(HarnessError::Degenerate);
    }
    let t = mean / (sd / (n as f64).sqrt());
    let df = n - 1;
    let significant_at =
        SIGNIFICANCE_LEVELS.iter().copied().filter(|&alpha| t.abs() > critical_value(df, alpha).unwrap()).collect();
    Ok(TTestResult { t, df, n, mean_difference: mean, significant_at })
}
