//! Domain types, the belief state over detector error rates and the
//! world/detection diff that drives belief updates.

mod beliefs;
mod diff;
mod types;

pub use beliefs::{update_beliefs, BetaParams, GammaParams, MetaBeliefs};
pub use diff::{diff_world_detections, match_detections, DiffResult, FrameMatch, ObjectEvent};
pub use types::{
    CategoryTable, Detection2D, FrameObservation, GroundTruthBox, Object3D, SceneData, Theta,
    WorldState,
};
