//! Weight arithmetic shared by the particle filters.

use rand::Rng;

/// Normalized weights from log weights. Returns `None` when every weight is
/// zero.
pub fn normalize(log_weights: &[f64]) -> Option<Vec<f64>> {
    let max = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return None;
    }
    let w: Vec<f64> = log_weights.iter().map(|l| (l - max).exp()).collect();
    let s: f64 = w.iter().sum();
    Some(w.into_iter().map(|v| v / s).collect())
}

/// Log of the mean weight, `log(1/M sum exp(l))`.
pub fn log_mean_exp(log_weights: &[f64]) -> f64 {
    let max = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let s: f64 = log_weights.iter().map(|l| (l - max).exp()).sum();
    max + (s / log_weights.len() as f64).ln()
}

pub fn effective_sample_size(weights: &[f64]) -> f64 {
    let s2: f64 = weights.iter().map(|w| w * w).sum();
    if s2 > 0.0 {
        1.0 / s2
    } else {
        0.0
    }
}

/// Systematic resampling: ancestor indices for `weights` (normalized).
pub fn systematic_resample<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Vec<usize> {
    let m = weights.len();
    let u0: f64 = rng.gen::<f64>() / m as f64;
    let mut out = Vec::with_capacity(m);
    let mut cum = weights[0];
    let mut i = 0;
    for k in 0..m {
        let u = u0 + k as f64 / m as f64;
        while u > cum && i + 1 < m {
            i += 1;
            cum += weights[i];
        }
        out.push(i);
    }
    out
}
