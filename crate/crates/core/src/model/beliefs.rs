//! Conjugate belief state over detector error rates.
//!
//! Hallucination counts are Poisson with a Gamma prior on the rate; the
//! number of detections of a visible object is geometric,
//! `P(N = n) = p^n (1 - p)`, with a Beta prior on `p`. Both updates are
//! closed form, so the counts in a batch of [`DiffResult`]s are sufficient.

use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma};
use serde::{Deserialize, Serialize};

use super::{DiffResult, Theta};
use crate::error::{Error, Result};

/// Shape `alpha` and rate `beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaParams {
    pub alpha: f64,
    pub beta: f64,
}

impl GammaParams {
    pub fn mean(&self) -> f64 {
        self.alpha / self.beta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaParams {
    pub alpha: f64,
    pub beta: f64,
}

impl BetaParams {
    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaBeliefs {
    /// Prior over each category's hallucination rate.
    pub gamma: Vec<GammaParams>,
    /// Prior over each category's detection rate.
    pub beta: Vec<BetaParams>,
}

// Samples are kept strictly inside the supports.
const P_EPS: f64 = 1e-12;

impl MetaBeliefs {
    /// Gamma(1, 1) and Beta(1, 1) for every category.
    pub fn prior(num_categories: usize) -> Result<Self> {
        if num_categories == 0 {
            return Err(Error::config("need at least one category"));
        }
        Ok(MetaBeliefs {
            gamma: vec![GammaParams { alpha: 1.0, beta: 1.0 }; num_categories],
            beta: vec![BetaParams { alpha: 1.0, beta: 1.0 }; num_categories],
        })
    }

    pub fn num_categories(&self) -> usize {
        self.gamma.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.gamma.len() != self.beta.len() || self.gamma.is_empty() {
            return Err(Error::config("belief vectors must be non-empty and equal length"));
        }
        let ok = self
            .gamma
            .iter()
            .map(|g| (g.alpha, g.beta))
            .chain(self.beta.iter().map(|b| (b.alpha, b.beta)))
            .all(|(a, b)| a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::config("belief parameters must be positive and finite"))
        }
    }

    /// Fold the counts of a scene into the beliefs. `num_frames` is the
    /// number of frames the diffs summarize.
    pub fn update(&self, diffs: &[DiffResult], num_frames: usize) -> Result<Self> {
        if num_frames == 0 {
            return Err(Error::data("belief update needs at least one frame"));
        }
        let n = self.num_categories();
        let mut out = self.clone();
        for d in diffs {
            if d.hallucinations.len() != n {
                return Err(Error::data(format!(
                    "diff has {} categories, beliefs have {n}",
                    d.hallucinations.len()
                )));
            }
            for (g, &h) in out.gamma.iter_mut().zip(&d.hallucinations) {
                g.alpha += h as f64;
            }
            for ev in &d.events {
                let b = out
                    .beta
                    .get_mut(ev.category)
                    .ok_or_else(|| Error::data("event category out of range"))?;
                b.alpha += ev.matches as f64;
                b.beta += 1.0;
            }
        }
        for g in &mut out.gamma {
            g.beta += num_frames as f64;
        }
        Ok(out)
    }

    /// Independent draws of every rate.
    pub fn sample_theta<R: Rng + ?Sized>(&self, rng: &mut R) -> Theta {
        let hallucination = self
            .gamma
            .iter()
            .map(|g| sample_gamma(*g, rng))
            .collect();
        let detection = self.beta.iter().map(|b| sample_beta(*b, rng)).collect();
        Theta {
            hallucination,
            detection,
        }
    }

    /// Draw the hallucination rate and detection rate of one category.
    pub fn sample_category<R: Rng + ?Sized>(&self, c: usize, rng: &mut R) -> (f64, f64) {
        (sample_gamma(self.gamma[c], rng), sample_beta(self.beta[c], rng))
    }

    /// Posterior means: `alpha / beta` for rates, `alpha / (alpha + beta)`
    /// for detection probabilities.
    pub fn expected_theta(&self) -> Theta {
        Theta {
            hallucination: self.gamma.iter().map(GammaParams::mean).collect(),
            detection: self
                .beta
                .iter()
                .map(|b| b.mean().min(1.0 - P_EPS))
                .collect(),
        }
    }

    /// Log density of `theta` under these beliefs (product of independent
    /// Gamma and Beta densities).
    pub fn log_density(&self, theta: &Theta) -> f64 {
        use statrs::function::gamma::ln_gamma;
        let mut lp = 0.0;
        for (g, &l) in self.gamma.iter().zip(&theta.hallucination) {
            if l <= 0.0 {
                return f64::NEG_INFINITY;
            }
            lp += g.alpha * g.beta.ln() - ln_gamma(g.alpha) + (g.alpha - 1.0) * l.ln() - g.beta * l;
        }
        for (b, &p) in self.beta.iter().zip(&theta.detection) {
            if !(p > 0.0 && p < 1.0) {
                return f64::NEG_INFINITY;
            }
            lp += ln_gamma(b.alpha + b.beta) - ln_gamma(b.alpha) - ln_gamma(b.beta)
                + (b.alpha - 1.0) * p.ln()
                + (b.beta - 1.0) * (1.0 - p).ln();
        }
        lp
    }
}

/// Free-function form of [`MetaBeliefs::update`].
pub fn update_beliefs(beliefs: &MetaBeliefs, diffs: &[DiffResult], num_frames: usize) -> Result<MetaBeliefs> {
    beliefs.update(diffs, num_frames)
}

pub(crate) fn sample_gamma<R: Rng + ?Sized>(g: GammaParams, rng: &mut R) -> f64 {
    let d = Gamma::new(g.alpha, 1.0 / g.beta).expect("validated gamma parameters");
    d.sample(rng).max(f64::MIN_POSITIVE)
}

pub(crate) fn sample_beta<R: Rng + ?Sized>(b: BetaParams, rng: &mut R) -> f64 {
    let d = Beta::new(b.alpha, b.beta).expect("validated beta parameters");
    d.sample(rng).clamp(P_EPS, 1.0 - P_EPS)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ObjectEvent;
    use crate::rng;

    fn diff(h: Vec<u32>, events: Vec<(usize, u32)>) -> DiffResult {
        DiffResult {
            hallucinations: h,
            events: events
                .into_iter()
                .enumerate()
                .map(|(i, (category, matches))| ObjectEvent {
                    object: i,
                    category,
                    matches,
                })
                .collect(),
        }
    }

    #[test]
    fn prior_is_unit_parameters() {
        let b = MetaBeliefs::prior(5).unwrap();
        assert_eq!(b.gamma.len(), 5);
        assert!(b.gamma.iter().all(|g| g.alpha == 1.0 && g.beta == 1.0));
        assert!(b.beta.iter().all(|g| g.alpha == 1.0 && g.beta == 1.0));
        let one = MetaBeliefs::prior(1).unwrap();
        assert_eq!(one.gamma, vec![GammaParams { alpha: 1.0, beta: 1.0 }]);
        assert!(MetaBeliefs::prior(0).is_err());
    }

    #[test]
    fn prior_mean_is_lesioned_theta() {
        let t = MetaBeliefs::prior(5).unwrap().expected_theta();
        assert!(t.hallucination.iter().all(|&l| l == 1.0));
        assert!(t.miss_rates().iter().all(|&m| m == 0.5));
    }

    #[test]
    fn gamma_update_three_hallucinations_two_frames() {
        let b = MetaBeliefs::prior(1).unwrap();
        let d = diff(vec![3], vec![]);
        let u = b.update(&[d], 2).unwrap();
        assert_eq!(u.gamma[0], GammaParams { alpha: 4.0, beta: 3.0 });
        assert_eq!(u.expected_theta().hallucination[0], 4.0 / 3.0);
    }

    #[test]
    fn beta_update_single_miss() {
        let b = MetaBeliefs::prior(1).unwrap();
        let u = b.update(&[diff(vec![0], vec![(0, 0)])], 1).unwrap();
        assert_eq!(u.beta[0], BetaParams { alpha: 1.0, beta: 2.0 });
        assert_eq!(u.expected_theta().detection[0], 1.0 / 3.0);
    }

    #[test]
    fn beta_mean_of_two_ten() {
        let b = MetaBeliefs {
            gamma: vec![GammaParams { alpha: 4.0, beta: 3.0 }],
            beta: vec![BetaParams { alpha: 2.0, beta: 10.0 }],
        };
        let t = b.expected_theta();
        assert_eq!(t.detection[0], 2.0 / 12.0);
        assert_eq!(t.hallucination[0], 4.0 / 3.0);
    }

    #[test]
    fn zero_frames_rejected() {
        let b = MetaBeliefs::prior(2).unwrap();
        assert!(b.update(&[], 0).is_err());
        assert!(b.update(&[diff(vec![0], vec![])], 1).is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let b = MetaBeliefs::prior(5).unwrap();
        let a = b.sample_theta(&mut rng::stream(11, &[]));
        let c = b.sample_theta(&mut rng::stream(11, &[]));
        assert_eq!(a, c);
    }

    #[test]
    fn concentrated_beliefs_sample_near_mean() {
        let b = MetaBeliefs {
            gamma: vec![GammaParams { alpha: 1e6, beta: 1e6 }],
            beta: vec![BetaParams { alpha: 1e6, beta: 1e6 }],
        };
        let mut r = rng::stream(4, &[]);
        for _ in 0..10_000 {
            let t = b.sample_theta(&mut r);
            assert!((t.hallucination[0] - 1.0).abs() < 0.01);
            assert!((t.detection[0] - 0.5).abs() < 0.01);
        }
    }

    #[test]
    fn log_density_of_uniform_prior() {
        let b = MetaBeliefs::prior(1).unwrap();
        let t = Theta::new(vec![0.5], vec![0.3]).unwrap();
        // Exp(1) at 0.5 and U(0,1)
        assert!((b.log_density(&t) - (-0.5)).abs() < 1e-12);
    }
}
