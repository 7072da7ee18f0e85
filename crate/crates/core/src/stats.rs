//! Small statistical helpers: moments, least squares, binomial intervals.

use serde::{Deserialize, Serialize};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959963984540054;

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance.
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Straight-line fit y = intercept + slope·x with the slope standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
}

impl LineFit {
    /// Half-width of the 95% interval of the slope.
    pub fn ci95(&self) -> f64 {
        Z95 * self.slope_se
    }
}

/// Weighted least squares with weights 1/var_i. With `vars = None` the
/// residual variance is used for the standard error.
pub fn fit_line(x: &[f64], y: &[f64], vars: Option<&[f64]>) -> LineFit {
    let n = x.len();
    let w: Vec<f64> = match vars {
        Some(v) => v.iter().map(|s| 1.0 / s).collect(),
        None => vec![1.0; n],
    };
    let sw: f64 = w.iter().sum();
    let xm = w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() / sw;
    let ym = w.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / sw;
    let sxx: f64 = (0..n).map(|i| w[i] * (x[i] - xm).powi(2)).sum();
    let sxy: f64 = (0..n).map(|i| w[i] * (x[i] - xm) * (y[i] - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let slope_se = match vars {
        Some(_) => (1.0 / sxx).sqrt(),
        None if n > 2 => {
            let rss: f64 = (0..n).map(|i| (y[i] - intercept - slope * x[i]).powi(2)).sum();
            (rss / (n as f64 - 2.0) / sxx).sqrt()
        }
        None => 0.0,
    };
    LineFit {
        slope,
        intercept,
        slope_se,
    }
}

/// 95% Wilson interval for k successes out of n. Zero counts use the
/// rule of three for the upper end (and symmetrically for k = n).
pub fn wilson(k: usize, n: usize) -> (f64, f64) {
    let nf = n as f64;
    if k == 0 {
        return (0.0, (3.0 / nf).min(1.0));
    }
    if k == n {
        return ((1.0 - 3.0 / nf).max(0.0), 1.0);
    }
    let p = k as f64 / nf;
    let z2 = Z95 * Z95;
    let den = 1.0 + z2 / nf;
    let centre = (p + z2 / (2.0 * nf)) / den;
    let half = Z95 * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / den;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Smallest x in [lo, hi] with `pred(x)` true for a monotone predicate,
/// located by bisection on a log scale.
pub fn log_bisect(lo: f64, hi: f64, mut pred: impl FnMut(f64) -> bool) -> f64 {
    let (mut a, mut b) = (lo.ln(), hi.ln());
    if pred(lo) {
        return lo;
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if pred(m.exp()) {
            b = m;
        } else {
            a = m;
        }
        if b - a < 1e-13 {
            break;
        }
    }
    b.exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        let f = fit_line(&x, &y, None);
        assert_relative_eq!(f.slope, -0.5, epsilon = 1e-14);
        assert_relative_eq!(f.intercept, 2.0, epsilon = 1e-14);
        assert!(f.slope_se < 1e-12);
    }

    #[test]
    fn wilson_edges() {
        assert_eq!(wilson(0, 1000), (0.0, 0.003));
        let (lo, hi) = wilson(50, 100);
        assert!(lo < 0.5 && hi > 0.5);
        assert_relative_eq!(0.5 - lo, hi - 0.5, epsilon = 1e-12);
    }

    #[test]
    fn bisection_finds_threshold() {
        let x = log_bisect(1e-6, 1e6, |c| c >= 3.7);
        assert_relative_eq!(x, 3.7, max_relative = 1e-10);
    }
}
