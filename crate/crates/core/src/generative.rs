//! Forward model: scene prior, detection simulator and the matching-based
//! likelihood used for inference.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, CameraPose, PinholeCamera, RoomBounds, Vec3};
use crate::model::{match_detections, Detection2D, FrameObservation, Object3D, SceneData, Theta, WorldState};

/// Detection counts per visible object are capped in simulation.
pub const MAX_DETECTIONS_PER_OBJECT: u32 = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenePrior {
    /// Geometric object-count parameter: `P(N = n) = p (1 - p)^n`.
    pub count_p: f64,
    /// Variance of the pairwise repulsion term.
    pub repulsion_variance: f64,
    pub bounds: RoomBounds,
}

impl Default for ScenePrior {
    fn default() -> Self {
        ScenePrior {
            count_p: 0.9,
            repulsion_variance: 1.0,
            bounds: RoomBounds::default(),
        }
    }
}

impl ScenePrior {
    pub fn validate(&self) -> Result<()> {
        if !(self.count_p > 0.0 && self.count_p < 1.0) {
            return Err(Error::config(format!("object-count p must lie in (0,1), got {}", self.count_p)));
        }
        if !(self.repulsion_variance > 0.0) {
            return Err(Error::config("repulsion variance must be positive"));
        }
        self.bounds.validate()
    }

    /// Log repulsion factor between two positions.
    pub fn pair_term(&self, a: &Vec3, b: &Vec3) -> f64 {
        let d2 = (a - b).norm_squared();
        (-(-d2 / (2.0 * self.repulsion_variance)).exp()).ln_1p()
    }

    /// Draw a world from the prior (geometric count, uniform categories and
    /// positions). The repulsion term is not applied here; it only enters
    /// through [`world_log_prior`].
    pub fn sample<R: Rng + ?Sized>(&self, num_categories: usize, rng: &mut R) -> WorldState {
        let mut n = 0usize;
        while rng.gen::<f64>() >= self.count_p && n < 64 {
            n += 1;
        }
        let objects = (0..n)
            .map(|_| Object3D::new(uniform_point(&self.bounds, rng), rng.gen_range(0..num_categories)))
            .collect();
        WorldState::new(objects)
    }
}

pub(crate) fn uniform_point<R: Rng + ?Sized>(b: &RoomBounds, rng: &mut R) -> Vec3 {
    Vec3::new(
        rng.gen_range(b.min.x..=b.max.x),
        rng.gen_range(b.min.y..=b.max.y),
        rng.gen_range(b.min.z..=b.max.z),
    )
}

/// Spatial detection noise and the radius used to attribute detections.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseModel {
    pub sigma_xy: f64,
    pub radius: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            sigma_xy: 200.0,
            radius: 200.0,
        }
    }
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        if self.sigma_xy > 0.0 && self.radius > 0.0 {
            Ok(())
        } else {
            Err(Error::config("noise sigma and matching radius must be positive"))
        }
    }
}

/// Log prior density of a world: geometric count, uniform category and
/// position, and `log(1 - exp(-d^2 / 2 s^2))` for every pair.
pub fn world_log_prior(world: &WorldState, prior: &ScenePrior, num_categories: usize) -> f64 {
    let n = world.objects.len() as f64;
    let mut lp = prior.count_p.ln() + n * (1.0 - prior.count_p).ln() - n * (num_categories as f64).ln();
    if world.objects.iter().any(|o| !prior.bounds.contains(&o.position)) {
        return f64::NEG_INFINITY;
    }
    lp -= n * prior.bounds.volume().ln();
    for (i, a) in world.objects.iter().enumerate() {
        for b in &world.objects[i + 1..] {
            lp += prior.pair_term(&a.position, &b.position);
        }
    }
    lp
}

/// Run the detector model over a camera trajectory.
///
/// Per frame and category, `Poisson(lambda_c)` hallucinations land uniformly
/// on the image; every visible object of category `c` yields `N` detections
/// with `P(N = n) = p_c^n (1 - p_c)` (capped at
/// [`MAX_DETECTIONS_PER_OBJECT`]), each displaced by isotropic Gaussian noise.
pub fn simulate_detections<R: Rng + ?Sized>(
    world: &WorldState,
    theta: &Theta,
    poses: &[CameraPose],
    intr: &CameraIntrinsics,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<Vec<FrameObservation>> {
    theta.validate()?;
    noise.validate()?;
    world.validate(theta.num_categories())?;
    let jitter = Normal::new(0.0, noise.sigma_xy).expect("positive sigma");
    let (w, h) = (intr.width as f64, intr.height as f64);
    let mut frames = Vec::with_capacity(poses.len());
    for pose in poses {
        let cam = PinholeCamera::new(pose, intr);
        let mut dets = Vec::new();
        for obj in &world.objects {
            let Some((px, py)) = cam.project_visible(&obj.position) else { continue };
            let p = theta.detection[obj.category];
            let mut n = 0;
            while n < MAX_DETECTIONS_PER_OBJECT && rng.gen::<f64>() < p {
                n += 1;
            }
            for _ in 0..n {
                dets.push(Detection2D::new(px + jitter.sample(rng), py + jitter.sample(rng), obj.category));
            }
        }
        for (c, &lambda) in theta.hallucination.iter().enumerate() {
            if lambda <= 0.0 {
                continue;
            }
            let k = Poisson::new(lambda).expect("positive rate").sample(rng) as usize;
            for _ in 0..k {
                dets.push(Detection2D::new(rng.gen_range(0.0..w), rng.gen_range(0.0..h), c));
            }
        }
        dets.shuffle(rng);
        frames.push(FrameObservation {
            camera: *pose,
            detections: dets,
        });
    }
    Ok(frames)
}

/// Sufficient statistics of a (world, detections) pairing. Together with the
/// spatial term they determine the likelihood for any theta.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchStats {
    pub num_frames: usize,
    /// Per category: total hallucinations.
    pub hallucinations: Vec<u64>,
    /// Per category: sum over frames of `ln(h_cf!)`.
    pub log_factorials: Vec<f64>,
    /// Per category: detections matched to visible objects.
    pub matches: Vec<u64>,
    /// Per category: visible-object events.
    pub events: Vec<u64>,
    /// Gaussian terms of matched detections plus uniform terms of
    /// hallucinated ones.
    pub spatial: f64,
    /// Matched detections per object, summed over frames.
    pub object_matches: Vec<u32>,
}

impl MatchStats {
    fn new(num_categories: usize, num_objects: usize) -> Self {
        MatchStats {
            num_frames: 0,
            hallucinations: vec![0; num_categories],
            log_factorials: vec![0.0; num_categories],
            matches: vec![0; num_categories],
            events: vec![0; num_categories],
            spatial: 0.0,
            object_matches: vec![0; num_objects],
        }
    }

    /// Count-dependent part of the log likelihood.
    pub fn count_log_likelihood(&self, theta: &Theta) -> f64 {
        let frames = self.num_frames as f64;
        let mut ll = 0.0;
        for c in 0..self.hallucinations.len() {
            let lambda = theta.hallucination[c];
            let h = self.hallucinations[c] as f64;
            ll += xlogy(h, lambda) - frames * lambda - self.log_factorials[c];
            let p = theta.detection[c];
            ll += xlogy(self.matches[c] as f64, p) + xlogy(self.events[c] as f64, 1.0 - p);
        }
        ll
    }

    pub fn log_likelihood(&self, theta: &Theta) -> f64 {
        let ll = self.count_log_likelihood(theta);
        if ll == f64::NEG_INFINITY {
            ll
        } else {
            ll + self.spatial
        }
    }
}

/// `x ln y` with `0 ln 0 = 0`.
#[inline]
fn xlogy(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

fn ln_factorial(n: u32) -> f64 {
    const TABLE: [f64; 8] = [
        0.0,
        0.0,
        std::f64::consts::LN_2,
        1.791_759_469_228_055,
        3.178_053_830_347_945_6,
        4.787_491_742_782_046,
        6.579_251_212_010_101,
        8.525_161_361_065_415,
    ];
    match TABLE.get(n as usize) {
        Some(v) => *v,
        None => ln_gamma(n as f64 + 1.0),
    }
}

/// Precomputed cameras for one scene; scores many world hypotheses against
/// the same detections.
#[derive(Debug, Clone)]
pub struct SceneScorer<'a> {
    scene: &'a SceneData,
    cameras: Vec<PinholeCamera>,
    noise: NoiseModel,
    num_categories: usize,
    log_gauss_norm: f64,
    log_uniform: f64,
}

impl<'a> SceneScorer<'a> {
    pub fn new(scene: &'a SceneData, intr: &CameraIntrinsics, noise: &NoiseModel, num_categories: usize) -> Self {
        let cameras = scene.frames.iter().map(|f| PinholeCamera::new(&f.camera, intr)).collect();
        SceneScorer {
            scene,
            cameras,
            noise: *noise,
            num_categories,
            log_gauss_norm: -(2.0 * std::f64::consts::PI * noise.sigma_xy * noise.sigma_xy).ln(),
            log_uniform: -intr.area().ln(),
        }
    }

    pub fn scene(&self) -> &'a SceneData {
        self.scene
    }

    pub fn cameras(&self) -> &[PinholeCamera] {
        &self.cameras
    }

    pub fn num_categories(&self) -> usize {
        self.num_categories
    }

    pub fn stats(&self, world: &WorldState) -> MatchStats {
        self.stats_for_frames(world, 0..self.scene.frames.len())
    }

    pub fn stats_for_frames(&self, world: &WorldState, frames: std::ops::Range<usize>) -> MatchStats {
        let mut st = MatchStats::new(self.num_categories, world.objects.len());
        let inv2s2 = 1.0 / (2.0 * self.noise.sigma_xy * self.noise.sigma_xy);
        let mut projections = Vec::with_capacity(world.objects.len());
        let mut per_cat = vec![0u32; self.num_categories];
        let mut per_obj = vec![0u32; world.objects.len()];
        for fi in frames {
            let frame = &self.scene.frames[fi];
            let cam = &self.cameras[fi];
            projections.clear();
            projections.extend(world.objects.iter().map(|o| cam.project_visible(&o.position)));
            per_cat.iter_mut().for_each(|v| *v = 0);
            per_obj.iter_mut().for_each(|v| *v = 0);
            let assignment = match_detections(world, &projections, &frame.detections, self.noise.radius);
            for (d, a) in frame.detections.iter().zip(&assignment) {
                match a {
                    Some((obj, d2)) => {
                        per_obj[*obj] += 1;
                        st.spatial += self.log_gauss_norm - d2 * inv2s2;
                    }
                    None => {
                        per_cat[d.category] += 1;
                        st.spatial += self.log_uniform;
                    }
                }
            }
            for (c, &h) in per_cat.iter().enumerate() {
                st.hallucinations[c] += h as u64;
                st.log_factorials[c] += ln_factorial(h);
            }
            for (i, (o, p)) in world.objects.iter().zip(&projections).enumerate() {
                if p.is_some() {
                    st.events[o.category] += 1;
                    st.matches[o.category] += per_obj[i] as u64;
                }
                st.object_matches[i] += per_obj[i];
            }
            st.num_frames += 1;
        }
        st
    }

    pub fn log_likelihood(&self, world: &WorldState, theta: &Theta) -> f64 {
        self.stats(world).log_likelihood(theta)
    }
}

/// Likelihood of one frame's detections given a world and theta, computed
/// through the detection/object attribution: Poisson hallucination counts,
/// geometric detection counts per visible object, Gaussian displacement of
/// matched detections and uniform placement of hallucinations.
pub fn frame_log_likelihood(
    frame: &FrameObservation,
    world: &WorldState,
    theta: &Theta,
    intr: &CameraIntrinsics,
    noise: &NoiseModel,
) -> f64 {
    let scene = SceneData::new(vec![frame.clone()]);
    SceneScorer::new(&scene, intr, noise, theta.num_categories()).log_likelihood(world, theta)
}

/// Sum of frame log likelihoods.
pub fn scene_log_likelihood(
    scene: &SceneData,
    world: &WorldState,
    theta: &Theta,
    intr: &CameraIntrinsics,
    noise: &NoiseModel,
) -> f64 {
    SceneScorer::new(scene, intr, noise, theta.num_categories()).log_likelihood(world, theta)
}
