//! Sequential Monte Carlo over scenes.
//!
//! Each scene is handled by propagate, weight, resample (when the effective
//! sample size drops below a threshold), rejuvenate, then a per-particle
//! belief update from the particle's own world. Particles run on per-particle
//! random streams, so results do not depend on the thread count.

mod filter;
mod proposals;
mod rejuvenate;

pub use filter::{estimate_v, reinfer, run_filter, run_filter_with_observer};
pub use proposals::{
    add_probability, category_weights, p_add, propose_category, propose_location, SceneIndex, SegmentRay,
};
pub use rejuvenate::{rejuvenate, ChainContext, Particle};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generative::ScenePrior;
use crate::model::{Theta, WorldState};

/// How the per-scene world estimate is read off the particle set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PointEstimate {
    /// The particle with the largest weight; ties go to the larger joint
    /// density of its world.
    #[default]
    HighestWeight,
    /// The category multiset carrying the most weight, represented by its
    /// best particle.
    CategoryVote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterConfig {
    pub num_particles: usize,
    pub rejuvenation_sweeps: usize,
    /// Per-axis standard deviation of the small location step.
    pub location_sigma: f64,
    /// Variance of the perpendicular offset around back-projected rays.
    pub line_variance: f64,
    /// Resample when ESS falls below this fraction of the particle count.
    pub ess_threshold: f64,
    pub seed: u64,
    pub scene_prior: ScenePrior,
    pub point_estimate: PointEstimate,
    pub add_rule: AddRule,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            num_particles: 100,
            rejuvenation_sweeps: 200,
            location_sigma: 0.01,
            line_variance: 0.01,
            ess_threshold: 0.5,
            seed: 0,
            scene_prior: ScenePrior::default(),
            point_estimate: PointEstimate::HighestWeight,
            add_rule: AddRule::Complement,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_particles == 0 {
            return Err(Error::config("need at least one particle"));
        }
        if !(self.location_sigma > 0.0 && self.line_variance > 0.0) {
            return Err(Error::config("proposal scales must be positive"));
        }
        if !(0.0..=1.0).contains(&self.ess_threshold) {
            return Err(Error::config("ESS threshold must lie in [0, 1]"));
        }
        self.scene_prior.validate()
    }
}

/// How the add/remove move splits its proposals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum AddRule {
    /// Propose additions with probability [`p_add`], half the chance that
    /// hallucinations alone produce more than the scene's `k` detections.
    Stated,
    /// Propose additions with probability `0.5 - p_add`, half the chance that
    /// hallucinations alone produce at most `k` detections. Additions become
    /// likely when the believed hallucination rate cannot account for the
    /// detections and unlikely when it easily can.
    #[default]
    Complement,
}

/// Proposal and acceptance counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MoveStats {
    pub add_proposed: u64,
    pub add_accepted: u64,
    pub remove_proposed: u64,
    pub remove_accepted: u64,
    pub move_proposed: u64,
    pub move_accepted: u64,
    pub theta_proposed: u64,
    pub theta_accepted: u64,
}

impl MoveStats {
    pub fn merge(&mut self, o: &MoveStats) {
        self.add_proposed += o.add_proposed;
        self.add_accepted += o.add_accepted;
        self.remove_proposed += o.remove_proposed;
        self.remove_accepted += o.remove_accepted;
        self.move_proposed += o.move_proposed;
        self.move_accepted += o.move_accepted;
        self.theta_proposed += o.theta_proposed;
        self.theta_accepted += o.theta_accepted;
    }

    fn rate(a: u64, p: u64) -> f64 {
        if p == 0 {
            0.0
        } else {
            a as f64 / p as f64
        }
    }

    pub fn world_acceptance(&self) -> f64 {
        Self::rate(self.add_accepted + self.remove_accepted, self.add_proposed + self.remove_proposed)
    }

    pub fn location_acceptance(&self) -> f64 {
        Self::rate(self.move_accepted, self.move_proposed)
    }

    pub fn theta_acceptance(&self) -> f64 {
        Self::rate(self.theta_accepted, self.theta_proposed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSummary {
    pub world: WorldState,
    pub theta_hat: Theta,
    /// ESS right after weighting, before any resampling.
    pub ess: f64,
    pub resampled: bool,
    /// Estimate of `log p(D_t | D_1..t-1)`.
    pub log_evidence: f64,
    pub moves: MoveStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferenceResult {
    pub scenes: Vec<SceneSummary>,
    pub final_theta: Theta,
    pub particles: Vec<Particle>,
}

impl InferenceResult {
    pub fn worlds(&self) -> Vec<WorldState> {
        self.scenes.iter().map(|s| s.world.clone()).collect()
    }

    pub fn theta_trajectory(&self) -> Vec<Theta> {
        self.scenes.iter().map(|s| s.theta_hat.clone()).collect()
    }
}
