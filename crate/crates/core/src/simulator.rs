//! Synthetic datasets.
//!
//! Two harnesses live here. The spatial-free one samples faulty detectors
//! (Bernoulli rates from `Beta(2, 10)`), presence-vector worlds and detection
//! frames. The 3D one samples rooms with a few well-separated objects, a
//! camera path through each room and detections under a known `Theta`.
//!
//! Every item gets its own random stream derived from the master seed and
//! the item index, so datasets can be generated in parallel and any single
//! detector or scene can be regenerated on its own.

use rand::Rng;
use rand_distr::{Beta, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generative::{simulate_detections, NoiseModel};
use crate::geometry::{
    is_visible, project, sample_trajectory, CameraIntrinsics, CameraPose, RoomBounds, TrajectoryParams, Vec3,
};
use crate::lightweight::{LwDetectorData, LwFrame, LwTheta, LwWorldPrior, LwWorldRecord, LwWorldState};
use crate::model::{GroundTruthBox, Object3D, SceneData, Theta, WorldState};
use crate::rng::{self, stage};

/// Rejection sampling of object layouts gives up after this many attempts.
pub const MAX_PLACEMENT_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LwDatasetParams {
    pub num_categories: usize,
    pub worlds_per_detector: usize,
    pub min_frames: usize,
    pub max_frames: usize,
    pub world_prior: LwWorldPrior,
    /// Parameters of the Beta distribution every error rate is drawn from.
    pub rate_alpha: f64,
    pub rate_beta: f64,
}

impl Default for LwDatasetParams {
    fn default() -> Self {
        LwDatasetParams {
            num_categories: 5,
            worlds_per_detector: 75,
            min_frames: 5,
            max_frames: 15,
            world_prior: LwWorldPrior::default(),
            rate_alpha: 2.0,
            rate_beta: 10.0,
        }
    }
}

impl LwDatasetParams {
    pub fn validate(&self) -> Result<()> {
        if self.worlds_per_detector == 0 || self.min_frames == 0 || self.min_frames > self.max_frames {
            return Err(Error::config("need at least one world and 1 <= min_frames <= max_frames"));
        }
        if !(self.rate_alpha > 0.0 && self.rate_beta > 0.0) {
            return Err(Error::config("rate prior parameters must be positive"));
        }
        self.world_prior.validate(self.num_categories)
    }
}

/// Draw a detector: every hallucination and miss probability independently
/// from `Beta(alpha, beta)`.
pub fn sample_lw_detector<R: Rng + ?Sized>(num_categories: usize, alpha: f64, beta: f64, rng: &mut R) -> Result<LwTheta> {
    let dist = Beta::new(alpha, beta).map_err(|e| Error::config(e.to_string()))?;
    let hallucination = (0..num_categories).map(|_| dist.sample(rng)).collect();
    let miss = (0..num_categories).map(|_| dist.sample(rng)).collect();
    Ok(LwTheta { hallucination, miss })
}

/// Draw a world from the generating prior.
pub fn sample_lw_world<R: Rng + ?Sized>(prior: &LwWorldPrior, num_categories: usize, rng: &mut R) -> LwWorldState {
    prior.sample(num_categories, rng)
}

/// One frame: present categories are detected with probability `1 - M_c`,
/// absent ones with probability `H_c`.
pub fn sample_lw_frame<R: Rng + ?Sized>(world: &LwWorldState, theta: &LwTheta, rng: &mut R) -> LwFrame {
    let detected = world
        .presence
        .iter()
        .enumerate()
        .map(|(c, &present)| {
            let u: f64 = rng.gen();
            if present {
                u >= theta.miss[c]
            } else {
                u < theta.hallucination[c]
            }
        })
        .collect();
    LwFrame { detected }
}

/// Worlds and frames for a detector with known rates.
pub fn sample_lw_detector_data<R: Rng + ?Sized>(
    id: u64,
    theta: LwTheta,
    params: &LwDatasetParams,
    rng: &mut R,
) -> LwDetectorData {
    let worlds = (0..params.worlds_per_detector)
        .map(|_| {
            let world = sample_lw_world(&params.world_prior, params.num_categories, rng);
            let n = rng.gen_range(params.min_frames..=params.max_frames);
            let frames = (0..n).map(|_| sample_lw_frame(&world, &theta, rng)).collect();
            LwWorldRecord {
                truth: Some(world),
                frames,
            }
        })
        .collect();
    LwDetectorData {
        id,
        theta: Some(theta),
        worlds,
    }
}

/// Detector `id` of the dataset generated under `seed`.
pub fn synthesize_lw_detector(seed: u64, id: u64, params: &LwDatasetParams) -> Result<LwDetectorData> {
    let mut r = rng::stream(seed, &[stage::DETECTOR, id]);
    let theta = sample_lw_detector(params.num_categories, params.rate_alpha, params.rate_beta, &mut r)?;
    Ok(sample_lw_detector_data(id, theta, params, &mut r))
}

/// `num_detectors` detectors, ids `0..num_detectors`.
pub fn synthesize_lw_dataset(num_detectors: usize, seed: u64, params: &LwDatasetParams) -> Result<Vec<LwDetectorData>> {
    if num_detectors == 0 {
        return Err(Error::config("need at least one detector"));
    }
    params.validate()?;
    (0..num_detectors as u64)
        .into_par_iter()
        .map(|id| synthesize_lw_detector(seed, id, params))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneParams {
    pub num_categories: usize,
    pub min_objects: usize,
    pub max_objects: usize,
    /// Objects keep at least this distance from each other and from the
    /// walls.
    pub separation: f64,
    pub bounds: RoomBounds,
    /// Objects rest between these heights.
    pub object_height: (f64, f64),
    pub trajectory: TrajectoryParams,
}

impl Default for SceneParams {
    fn default() -> Self {
        SceneParams {
            num_categories: 5,
            min_objects: 1,
            max_objects: 3,
            separation: 1.0,
            bounds: RoomBounds::default(),
            object_height: (0.0, 1.0),
            trajectory: TrajectoryParams::default(),
        }
    }
}

impl SceneParams {
    pub fn validate(&self) -> Result<()> {
        if self.num_categories == 0 || self.min_objects > self.max_objects {
            return Err(Error::config("need categories and min_objects <= max_objects"));
        }
        if !(self.separation >= 0.0) || !(self.object_height.0 <= self.object_height.1) {
            return Err(Error::config("separation must be non-negative and heights ordered"));
        }
        self.bounds.validate()?;
        self.trajectory.validate()
    }
}

/// A room with `U{min..max}` objects of uniform categories placed uniformly
/// with pairwise and wall clearance, plus a camera path through it.
pub fn synthesize_3d_scene<R: Rng + ?Sized>(params: &SceneParams, rng: &mut R) -> Result<(WorldState, Vec<CameraPose>)> {
    params.validate()?;
    let n = rng.gen_range(params.min_objects..=params.max_objects);
    let b = &params.bounds;
    let s = params.separation;
    if b.min.x + s > b.max.x - s || b.min.z + s > b.max.z - s {
        return Err(Error::Overcrowded { attempts: 0 });
    }
    let mut placed: Vec<Vec3> = Vec::with_capacity(n);
    let mut attempts = 0;
    while placed.len() < n {
        if attempts == MAX_PLACEMENT_ATTEMPTS {
            return Err(Error::Overcrowded { attempts });
        }
        attempts += 1;
        let p = Vec3::new(
            rng.gen_range(b.min.x + s..=b.max.x - s),
            rng.gen_range(params.object_height.0..=params.object_height.1),
            rng.gen_range(b.min.z + s..=b.max.z - s),
        );
        if placed.iter().all(|q| (p - q).norm() >= s) {
            placed.push(p);
        }
    }
    let objects = placed
        .into_iter()
        .map(|p| Object3D::new(p, rng.gen_range(0..params.num_categories)))
        .collect();
    let poses = sample_trajectory(&params.trajectory, rng)?;
    Ok((WorldState::new(objects), poses))
}

/// Settings of the 3D closed-loop generator besides the room layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Synth3dParams {
    pub scene: SceneParams,
    pub intrinsics: CameraIntrinsics,
    /// Noise of the simulated detector. This is the world's noise, not the
    /// model's; it is usually much tighter than the matching radius.
    pub detector_noise: NoiseModel,
    /// Half extents of the ground-truth boxes drawn around projected objects.
    pub box_half_width: f64,
    pub box_half_height: f64,
}

impl Default for Synth3dParams {
    fn default() -> Self {
        Synth3dParams {
            scene: SceneParams::default(),
            intrinsics: CameraIntrinsics::default(),
            detector_noise: NoiseModel {
                sigma_xy: 20.0,
                radius: 200.0,
            },
            box_half_width: 100.0,
            box_half_height: 100.0,
        }
    }
}

/// Boxes around every visible object, per frame.
pub fn truth_boxes(
    world: &WorldState,
    poses: &[CameraPose],
    intr: &CameraIntrinsics,
    half_width: f64,
    half_height: f64,
) -> Vec<Vec<GroundTruthBox>> {
    poses
        .iter()
        .map(|pose| {
            world
                .objects
                .iter()
                .filter(|o| is_visible(&o.position, pose, intr))
                .filter_map(|o| {
                    project(&o.position, pose, intr).map(|center| GroundTruthBox {
                        center,
                        half_width,
                        half_height,
                        category: o.category,
                    })
                })
                .collect()
        })
        .collect()
}

/// Scene `index` of the dataset generated under `seed`.
pub fn synthesize_3d_scene_data(seed: u64, index: u64, theta_true: &Theta, params: &Synth3dParams) -> Result<SceneData> {
    let mut r = rng::stream(seed, &[stage::SCENE, index]);
    let (world, poses) = synthesize_3d_scene(&params.scene, &mut r)?;
    let mut r = rng::stream(seed, &[stage::DETECTIONS, index]);
    let frames = simulate_detections(&world, theta_true, &poses, &params.intrinsics, &params.detector_noise, &mut r)?;
    let boxes = truth_boxes(&world, &poses, &params.intrinsics, params.box_half_width, params.box_half_height);
    Ok(SceneData {
        frames,
        ground_truth: Some(world),
        truth_boxes: Some(boxes),
    })
}

/// `num_scenes` scenes with detections from a detector with rates
/// `theta_true`. Ground truth is stored for evaluation only.
pub fn synthesize_3d_dataset(num_scenes: usize, seed: u64, theta_true: &Theta, params: &Synth3dParams) -> Result<Vec<SceneData>> {
    theta_true.validate()?;
    if theta_true.num_categories() != params.scene.num_categories {
        return Err(Error::config("theta and scene parameters disagree on the number of categories"));
    }
    params.intrinsics.validate()?;
    if !(params.box_half_width > 0.0 && params.box_half_height > 0.0) {
        return Err(Error::config("box half extents must be positive"));
    }
    (0..num_scenes as u64)
        .into_par_iter()
        .map(|i| synthesize_3d_scene_data(seed, i, theta_true, params))
        .collect()
}
