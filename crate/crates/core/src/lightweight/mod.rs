//! Spatial-free variant.
//!
//! Worlds are presence vectors over categories, each frame is a detection
//! vector, and the detector flips bits independently: a present category is
//! missed with probability `M_c`, an absent one is hallucinated with
//! probability `H_c`. Error rates have a fixed `Beta(2, 10)` prior and do not
//! drift between worlds.

mod filter;

pub use filter::{lw_exact_world_posterior, lw_reinfer, lw_run_filter, LwRunResult};

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bernoulli error rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LwTheta {
    pub hallucination: Vec<f64>,
    pub miss: Vec<f64>,
}

impl LwTheta {
    pub fn new(hallucination: Vec<f64>, miss: Vec<f64>) -> Result<Self> {
        let t = LwTheta { hallucination, miss };
        t.validate()?;
        Ok(t)
    }

    pub fn uniform(num_categories: usize, h: f64, m: f64) -> Self {
        LwTheta {
            hallucination: vec![h; num_categories],
            miss: vec![m; num_categories],
        }
    }

    /// The prior-mean rates used by the lesioned model.
    pub fn lesioned(num_categories: usize) -> Self {
        Self::uniform(num_categories, 1.0 / 6.0, 1.0 / 6.0)
    }

    pub fn num_categories(&self) -> usize {
        self.hallucination.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.hallucination.is_empty() || self.hallucination.len() != self.miss.len() {
            return Err(Error::config("theta vectors must be non-empty and of equal length"));
        }
        if self
            .hallucination
            .iter()
            .chain(&self.miss)
            .any(|v| !(0.0..=1.0).contains(v))
        {
            return Err(Error::config("lightweight rates must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Which categories are present.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LwWorldState {
    pub presence: Vec<bool>,
}

impl LwWorldState {
    pub fn from_mask(mask: u32, num_categories: usize) -> Self {
        LwWorldState {
            presence: (0..num_categories).map(|c| mask >> c & 1 == 1).collect(),
        }
    }

    pub fn mask(&self) -> u32 {
        bits_to_mask(&self.presence)
    }

    pub fn count(&self) -> usize {
        self.presence.iter().filter(|&&b| b).count()
    }

    /// Indices of the present categories.
    pub fn categories(&self) -> Vec<usize> {
        (0..self.presence.len()).filter(|&c| self.presence[c]).collect()
    }
}

/// Which categories the detector reported in one frame.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LwFrame {
    pub detected: Vec<bool>,
}

impl LwFrame {
    pub fn mask(&self) -> u32 {
        bits_to_mask(&self.detected)
    }
}

fn bits_to_mask(bits: &[bool]) -> u32 {
    bits.iter()
        .enumerate()
        .fold(0, |m, (c, &b)| if b { m | 1 << c } else { m })
}

/// `a * ln(p)` with `0 * ln(0) = 0`.
fn xlog(a: f64, p: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else {
        a * p.ln()
    }
}

pub fn lw_frame_log_likelihood(frame: &LwFrame, world: &LwWorldState, theta: &LwTheta) -> f64 {
    debug_assert_eq!(frame.detected.len(), world.presence.len());
    let mut ll = 0.0;
    for c in 0..world.presence.len() {
        let p = match (world.presence[c], frame.detected[c]) {
            (true, true) => 1.0 - theta.miss[c],
            (true, false) => theta.miss[c],
            (false, true) => theta.hallucination[c],
            (false, false) => 1.0 - theta.hallucination[c],
        };
        ll += xlog(1.0, p);
    }
    ll
}

/// Prior over worlds: a Poisson count truncated to `[min_count, max_count]`,
/// then that many distinct categories chosen uniformly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LwWorldPrior {
    pub count_rate: f64,
    pub min_count: usize,
    pub max_count: usize,
}

impl Default for LwWorldPrior {
    fn default() -> Self {
        LwWorldPrior {
            count_rate: 1.0,
            min_count: 1,
            max_count: 5,
        }
    }
}

impl LwWorldPrior {
    pub fn validate(&self, num_categories: usize) -> Result<()> {
        if !(self.count_rate > 0.0) || self.min_count > self.max_count {
            return Err(Error::config("world prior needs a positive rate and min <= max"));
        }
        if self.min_count > num_categories {
            return Err(Error::config(format!(
                "world prior needs at least {} categories, have {num_categories}",
                self.min_count
            )));
        }
        Ok(())
    }

    fn upper(&self, num_categories: usize) -> usize {
        self.max_count.min(num_categories)
    }

    /// Probabilities of each count `min..=upper`.
    pub fn count_probabilities(&self, num_categories: usize) -> Vec<f64> {
        let hi = self.upper(num_categories);
        let mut terms = Vec::new();
        let mut term = (-self.count_rate).exp();
        for n in 0..=hi {
            if n > 0 {
                term *= self.count_rate / n as f64;
            }
            if n >= self.min_count {
                terms.push(term);
            }
        }
        let z: f64 = terms.iter().sum();
        terms.into_iter().map(|t| t / z).collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, num_categories: usize, rng: &mut R) -> LwWorldState {
        let probs = self.count_probabilities(num_categories);
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut n = self.upper(num_categories);
        for (i, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                n = self.min_count + i;
                break;
            }
        }
        let mut presence = vec![false; num_categories];
        for c in index::sample(rng, num_categories, n) {
            presence[c] = true;
        }
        LwWorldState { presence }
    }

    /// `(mask, log prior)` for every world in the support, in ascending mask
    /// order.
    pub fn support(&self, num_categories: usize) -> Vec<(u32, f64)> {
        assert!(num_categories <= 20, "world enumeration is limited to 20 categories");
        let probs = self.count_probabilities(num_categories);
        let hi = self.upper(num_categories);
        let log_choose = |n: usize| -> f64 {
            (0..n).map(|i| ((num_categories - i) as f64 / (i + 1) as f64).ln()).sum()
        };
        (0u32..1 << num_categories)
            .filter_map(|m| {
                let n = m.count_ones() as usize;
                (n >= self.min_count && n <= hi)
                    .then(|| (m, probs[n - self.min_count].ln() - log_choose(n)))
            })
            .collect()
    }

    pub fn log_prob(&self, world: &LwWorldState) -> f64 {
        let c = world.presence.len();
        let n = world.count();
        if n < self.min_count || n > self.upper(c) {
            return f64::NEG_INFINITY;
        }
        let log_choose: f64 = (0..n).map(|i| ((c - i) as f64 / (i + 1) as f64).ln()).sum();
        self.count_probabilities(c)[n - self.min_count].ln() - log_choose
    }
}

/// How each particle picks its hypothesis for a new world.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LwWorldProposal {
    /// Draw from the world prior and weight by the likelihood.
    #[default]
    Prior,
    /// Draw from the world's exact conditional posterior given the particle's
    /// rates, weighting by the marginal likelihood; the world is also
    /// re-drawn from that conditional during rejuvenation.
    Posterior,
}

/// How the filter reports its estimate of each world.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LwWorldEstimate {
    /// Most probable world under the weighted mixture of each particle's
    /// exact conditional world posterior.
    Marginal,
    /// World carrying the most particle weight.
    #[default]
    Vote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LwConfig {
    pub num_particles: usize,
    /// Rejuvenation sweeps per world; each sweep visits every rate once.
    pub rejuvenation_sweeps: usize,
    /// Standard deviation of the truncated-normal rate proposal.
    pub proposal_sd: f64,
    pub prior_alpha: f64,
    pub prior_beta: f64,
    pub ess_threshold: f64,
    pub world_prior: LwWorldPrior,
    pub world_proposal: LwWorldProposal,
    pub world_estimate: LwWorldEstimate,
    pub seed: u64,
}

impl Default for LwConfig {
    fn default() -> Self {
        LwConfig {
            num_particles: 100,
            rejuvenation_sweeps: 20,
            proposal_sd: 0.1,
            prior_alpha: 2.0,
            prior_beta: 10.0,
            ess_threshold: 0.5,
            world_prior: LwWorldPrior::default(),
            world_proposal: LwWorldProposal::Prior,
            world_estimate: LwWorldEstimate::Vote,
            seed: 0,
        }
    }
}

impl LwConfig {
    pub fn validate(&self, num_categories: usize) -> Result<()> {
        if self.num_particles == 0 {
            return Err(Error::config("need at least one particle"));
        }
        if !(self.proposal_sd > 0.0 && self.prior_alpha > 0.0 && self.prior_beta > 0.0) {
            return Err(Error::config("proposal scale and prior parameters must be positive"));
        }
        if !(0.0..=1.0).contains(&self.ess_threshold) {
            return Err(Error::config("ESS threshold must lie in [0, 1]"));
        }
        if num_categories == 0 || num_categories > 20 {
            return Err(Error::config("lightweight model supports 1 to 20 categories"));
        }
        self.world_prior.validate(num_categories)
    }

    pub fn prior_mean(&self) -> f64 {
        self.prior_alpha / (self.prior_alpha + self.prior_beta)
    }
}

/// One world and the frames the detector produced for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LwWorldRecord {
    /// Truth, for evaluation only.
    pub truth: Option<LwWorldState>,
    pub frames: Vec<LwFrame>,
}

/// Everything one simulated detector produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LwDetectorData {
    pub id: u64,
    /// Truth, for evaluation only.
    pub theta: Option<LwTheta>,
    pub worlds: Vec<LwWorldRecord>,
}

impl LwDetectorData {
    pub fn num_categories(&self) -> Option<usize> {
        self.worlds
            .iter()
            .flat_map(|w| w.frames.first())
            .map(|f| f.detected.len())
            .next()
    }

    pub fn frames(&self) -> Vec<&[LwFrame]> {
        self.worlds.iter().map(|w| w.frames.as_slice()).collect()
    }
}
