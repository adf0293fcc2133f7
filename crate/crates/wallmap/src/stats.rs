//! Summary statistics for timing samples.

use statrs::distribution::{ContinuousCDF, StudentsT};

/// Linear interpolation between closest ranks, `q` in `[0, 1]`.
/// NaN for an empty slice.
pub fn quantile(samples: &[f64], q: f64) -> f64 {
    if samples.is_empty() {
        return f64::NAN;
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (s.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    s[lo] + (s[hi] - s[lo]) * (pos - lo as f64)
}

pub fn median(samples: &[f64]) -> f64 {
    quantile(samples, 0.5)
}

/// Ordinary least squares `y = intercept + slope·x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub slope_stderr: f64,
    /// Residual degrees of freedom.
    pub dof: usize,
}

impl LinearFit {
    /// Needs at least three points with distinct `x`.
    pub fn fit(x: &[f64], y: &[f64]) -> Option<Self> {
        let n = x.len();
        if n != y.len() || n < 3 {
            return None;
        }
        let nf = n as f64;
        let mx = x.iter().sum::<f64>() / nf;
        let my = y.iter().sum::<f64>() / nf;
        let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
        let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
        if sxx <= 0.0 {
            return None;
        }
        let slope = sxy / sxx;
        let intercept = my - slope * mx;
        let sse: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
        let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
        let dof = n - 2;
        Some(Self {
            slope,
            intercept,
            r_squared,
            slope_stderr: (sse / dof as f64 / sxx).sqrt(),
            dof,
        })
    }

    /// Two-sided confidence interval of the slope.
    pub fn slope_interval(&self, level: f64) -> (f64, f64) {
        let t = StudentsT::new(0.0, 1.0, self.dof as f64)
            .expect("dof is positive")
            .inverse_cdf(0.5 + level / 2.0);
        (self.slope - t * self.slope_stderr, self.slope + t * self.slope_stderr)
    }
}
