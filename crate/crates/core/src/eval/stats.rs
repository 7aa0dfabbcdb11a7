//! Curves, regression and bootstrap intervals.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Windowed means on a grid of query points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyCurve {
    pub half_width: f64,
    /// `(query, mean, samples in window)`, queries strictly increasing.
    pub points: Vec<(f64, f64, usize)>,
}

impl AccuracyCurve {
    pub fn value_at(&self, x: f64) -> Option<f64> {
        self.points.iter().find(|p| (p.0 - x).abs() < 1e-9).map(|p| p.1)
    }
}

/// `lo, lo + step, ..., hi` computed by index to avoid drift.
pub fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| lo + step * i as f64).collect()
}

/// Faultiness grid used for exported curves: 0.00 to 0.50 by 0.01.
pub fn faultiness_grid() -> Vec<f64> {
    grid(0.0, 0.5, 0.01)
}

/// For each query, the mean of `y` over samples with `|x - query| <= half_width`.
/// Queries whose window holds no sample are left out.
pub fn rolling_accuracy_curve(points: &[(f64, f64)], half_width: f64, queries: &[f64]) -> AccuracyCurve {
    let mut sorted: Vec<(f64, f64)> = points.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let xs: Vec<f64> = sorted.iter().map(|p| p.0).collect();
    // prefix sums of y
    let mut prefix = vec![0.0; sorted.len() + 1];
    for (i, p) in sorted.iter().enumerate() {
        prefix[i + 1] = prefix[i] + p.1;
    }
    let eps = 1e-12;
    let out = queries
        .iter()
        .filter_map(|&q| {
            let lo = xs.partition_point(|&x| x < q - half_width - eps);
            let hi = xs.partition_point(|&x| x <= q + half_width + eps);
            (hi > lo).then(|| (q, (prefix[hi] - prefix[lo]) / (hi - lo) as f64, hi - lo))
        })
        .collect();
    AccuracyCurve {
        half_width,
        points: out,
    }
}

/// Ordinary least squares `y = intercept + slope x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regression {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    /// Two-sided p-value for a zero slope.
    pub p_value: f64,
    pub r_squared: f64,
    pub n: usize,
}

pub fn linear_regression(x: &[f64], y: &[f64]) -> Result<Regression> {
    let n = x.len();
    if n != y.len() || n < 3 {
        return Err(Error::data("regression needs at least 3 paired samples"));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::data("regression predictor has zero variance"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let slope_se = (sse / (nf - 2.0) / sxx).sqrt();
    let p_value = if slope_se > 0.0 {
        let t = StudentsT::new(0.0, 1.0, nf - 2.0).expect("valid dof");
        2.0 * (1.0 - t.cdf((slope / slope_se).abs()))
    } else {
        0.0
    };
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    Ok(Regression {
        slope,
        intercept,
        slope_se,
        p_value,
        r_squared,
        n,
    })
}

/// Percentile bootstrap of the mean paired difference `a - b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapInterval {
    pub mean_difference: f64,
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
}

impl BootstrapInterval {
    pub fn excludes_zero(&self) -> bool {
        self.lower > 0.0 || self.upper < 0.0
    }
}

pub fn paired_bootstrap<R: Rng + ?Sized>(
    a: &[f64],
    b: &[f64],
    resamples: usize,
    level: f64,
    rng: &mut R,
) -> Result<BootstrapInterval> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::data("bootstrap needs two non-empty paired samples"));
    }
    if resamples == 0 || !(level > 0.0 && level < 1.0) {
        return Err(Error::config("bootstrap needs resamples > 0 and a level in (0,1)"));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len();
    let mean = d.iter().sum::<f64>() / n as f64;
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| d[rng.gen_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    let pick = |q: f64| means[((q * resamples as f64).floor() as usize).min(resamples - 1)];
    Ok(BootstrapInterval {
        mean_difference: mean,
        lower: pick(tail),
        upper: pick(1.0 - tail),
        level,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn two_clusters() {
        let pts = vec![(0.1, 1.0), (0.1, 1.0), (0.4, 0.5), (0.41, 0.5)];
        let c = rolling_accuracy_curve(&pts, 0.05, &faultiness_grid());
        assert_eq!(c.value_at(0.1), Some(1.0));
        assert_eq!(c.value_at(0.4), Some(0.5));
        assert_eq!(c.value_at(0.25), None);
        assert!(c.points.windows(2).all(|w| w[0].0 < w[1].0));
    }

    #[test]
    fn exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let r = linear_regression(&x, &y).unwrap();
        assert!((r.slope - 2.0).abs() < 1e-12 && (r.intercept - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bootstrap_detects_shift() {
        let a: Vec<f64> = (0..50).map(|i| 0.5 + 0.01 * (i % 7) as f64).collect();
        let b: Vec<f64> = a.iter().map(|x| x - 0.1).collect();
        let ci = paired_bootstrap(&a, &b, 1000, 0.95, &mut rng::stream(1, &[])).unwrap();
        assert!(ci.excludes_zero());
        assert!((ci.mean_difference - 0.1).abs() < 1e-12);
    }

    #[test]
    fn grid_endpoints() {
        let g = faultiness_grid();
        assert_eq!(g.len(), 51);
        assert_eq!(g[50], 0.5);
    }
}
