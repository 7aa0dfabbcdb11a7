//! Joint inference of an object detector's error profile and the 3D scenes
//! that produced its detections.
//!
//! The detector is treated as a black box. Its outputs across multi-view
//! scenes are explained by a generative model in which every category has a
//! Poisson hallucination rate and a geometric detection rate; a particle
//! filter with Metropolis-Hastings rejuvenation recovers both the rates and
//! the objects. A spatial-free variant ([`lightweight`]) and a synthetic
//! detector harness ([`simulator`]) support large robustness sweeps.
//!
//! Module map:
//!
//! * [`model`]: domain types, belief state, conjugate updates, world/detection diff
//! * [`geometry`]: pinhole projection, back-projection, camera trajectories
//! * [`generative`]: scene prior, detection simulator, likelihood
//! * [`inference`]: sequential Monte Carlo with rejuvenation
//! * [`lightweight`]: presence-vector model with Bernoulli errors
//! * [`simulator`]: synthetic datasets
//! * [`eval`]: metrics
//! * [`smc`]: particle weight arithmetic and systematic resampling
//! * [`cli`]: configuration, file formats and the command implementations

pub mod cli;
pub mod error;
pub mod eval;
pub mod generative;
pub mod geometry;
pub mod inference;
pub mod lightweight;
pub mod model;
pub mod rng;
pub mod simulator;
pub mod smc;

pub use error::{Error, Result};
pub use model::{
    CategoryTable, Detection2D, FrameObservation, MetaBeliefs, Object3D, SceneData, Theta,
    WorldState,
};
