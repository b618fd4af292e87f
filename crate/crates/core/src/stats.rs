//! Small sample statistics used by the experiment drivers.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Mean, sample standard deviation and normal-approximation confidence
/// half-width of a set of trial values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    pub stderr: f64,
    /// Half-width of the 95% confidence interval.
    pub ci95: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self {
                n,
                mean: f64::NAN,
                std: f64::NAN,
                stderr: f64::NAN,
                ci95: f64::NAN,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        let stderr = std / (n as f64).sqrt();
        Self {
            n,
            mean,
            std,
            stderr,
            ci95: 1.96 * stderr,
        }
    }

    pub fn lower(&self) -> f64 {
        self.mean - self.ci95
    }

    pub fn upper(&self) -> f64 {
        self.mean + self.ci95
    }
}

/// Least-squares line `y = slope * x + intercept` and its coefficient of
/// determination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> LinearFit {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    LinearFit {
        slope,
        intercept: my - slope * mx,
        r_squared: if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 },
    }
}

/// Correlation `Re(sum x y*) / sqrt(sum |x|^2 sum |y|^2)` over independent
/// pairs, with a delete-one-batch jackknife standard error.
pub fn pair_correlation(pairs: &[(Complex64, Complex64)], batches: usize) -> (f64, f64) {
    let ratio = |s: &[f64; 3]| s[0] / (s[1] * s[2]).sqrt();
    let batches = batches.clamp(2, pairs.len().max(2));
    let size = pairs.len().div_ceil(batches);
    let sums: Vec<[f64; 3]> = pairs
        .chunks(size)
        .map(|chunk| {
            chunk.iter().fold([0.0; 3], |acc, (x, y)| {
                [acc[0] + (x * y.conj()).re, acc[1] + x.norm_sqr(), acc[2] + y.norm_sqr()]
            })
        })
        .collect();
    let total = sums
        .iter()
        .fold([0.0; 3], |a, s| [a[0] + s[0], a[1] + s[1], a[2] + s[2]]);
    let estimate = ratio(&total);
    let g = sums.len() as f64;
    let leave_out: Vec<f64> = sums
        .iter()
        .map(|s| ratio(&[total[0] - s[0], total[1] - s[1], total[2] - s[2]]))
        .collect();
    let mean = leave_out.iter().sum::<f64>() / g;
    let var = (g - 1.0) / g * leave_out.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
    (estimate, var.sqrt())
}
