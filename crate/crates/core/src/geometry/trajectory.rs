use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{CameraPose, Vec3};
use crate::error::{Error, Result};

/// Squared-exponential kernel `sigma^2 exp(-(s - s')^2 / (2 length^2))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RbfKernel {
    pub sigma: f64,
    pub length: f64,
}

const JITTER: f64 = 1e-8;

impl RbfKernel {
    pub fn new(sigma: f64, length: f64) -> Result<Self> {
        let k = RbfKernel { sigma, length };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.length > 0.0 && self.sigma.is_finite() && self.length.is_finite()) {
            return Err(Error::config(format!(
                "RBF kernel parameters must be positive, got sigma={} length={}",
                self.sigma, self.length
            )));
        }
        Ok(())
    }

    pub fn eval(&self, a: f64, b: f64) -> f64 {
        let d = (a - b) / self.length;
        self.sigma * self.sigma * (-0.5 * d * d).exp()
    }

    /// Lower Cholesky factor of the unit-variance Gram matrix (plus jitter).
    fn correlation_factor(&self, inputs: &[f64]) -> DMatrix<f64> {
        let n = inputs.len();
        let gram = DMatrix::from_fn(n, n, |i, j| {
            let d = (inputs[i] - inputs[j]) / self.length;
            (-0.5 * d * d).exp() + if i == j { JITTER } else { 0.0 }
        });
        gram.cholesky()
            .expect("RBF Gram matrix with jitter is positive definite")
            .l()
    }

    /// Draw `count` independent zero-mean GP sample paths at `inputs`.
    pub fn sample_paths<R: Rng + ?Sized>(
        &self,
        inputs: &[f64],
        count: usize,
        rng: &mut R,
    ) -> Vec<Vec<f64>> {
        let l = self.correlation_factor(inputs);
        let n = inputs.len();
        (0..count)
            .map(|_| {
                let z = DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
                (l.clone() * z).iter().map(|v| v * self.sigma).collect()
            })
            .collect()
    }
}

/// Parameters of the camera-path generator: an elliptical loop around the
/// room at constant height, perturbed by a GP, looking at a GP-perturbed
/// point above the floor center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrajectoryParams {
    pub num_frames: usize,
    pub path_kernel: RbfKernel,
    pub focal_kernel: RbfKernel,
    pub camera_height: f64,
    /// Room footprint along x and z.
    pub room_width: f64,
    pub room_depth: f64,
    /// Loop semi-axes as a fraction of the half footprint.
    pub loop_fraction: f64,
    pub focal_mean: Vec3,
    /// Starting angle of the loop; drawn uniformly when `None`.
    pub start_angle: Option<f64>,
}

impl Default for TrajectoryParams {
    fn default() -> Self {
        TrajectoryParams {
            num_frames: 20,
            path_kernel: RbfKernel { sigma: 0.7, length: 2.5 },
            focal_kernel: RbfKernel { sigma: 0.7, length: 2.0 },
            camera_height: 2.0,
            room_width: 12.0,
            room_depth: 8.0,
            loop_fraction: 0.75,
            focal_mean: Vec3::new(0.0, 0.5, 0.0),
            start_angle: None,
        }
    }
}

impl TrajectoryParams {
    pub fn validate(&self) -> Result<()> {
        if self.num_frames == 0 {
            return Err(Error::config("trajectory needs at least one frame"));
        }
        self.path_kernel.validate()?;
        self.focal_kernel.validate()?;
        if !(self.room_width > 0.0 && self.room_depth > 0.0 && self.loop_fraction > 0.0) {
            return Err(Error::config("room footprint and loop fraction must be positive"));
        }
        Ok(())
    }

    fn semi_axes(&self) -> (f64, f64) {
        (
            0.5 * self.room_width * self.loop_fraction,
            0.5 * self.room_depth * self.loop_fraction,
        )
    }

    /// Loop angles for each frame and the matching GP inputs (approximate
    /// arc length along the loop, so kernel length scales are in scene units).
    pub fn frame_parameters(&self, start: f64) -> (Vec<f64>, Vec<f64>) {
        let (a, b) = self.semi_axes();
        let mean_radius = 0.5 * (a + b);
        let step = std::f64::consts::TAU / self.num_frames as f64;
        let angles: Vec<f64> = (0..self.num_frames).map(|i| start + step * i as f64).collect();
        let arc = (0..self.num_frames).map(|i| mean_radius * step * i as f64).collect();
        (angles, arc)
    }

    /// Unperturbed camera position at loop angle `angle`.
    pub fn base_position(&self, angle: f64) -> Vec3 {
        let (a, b) = self.semi_axes();
        Vec3::new(a * angle.cos(), self.camera_height, b * angle.sin())
    }
}

/// Sample a camera trajectory, one pose per frame. Camera height is held
/// exactly at `camera_height`.
pub fn sample_trajectory<R: Rng + ?Sized>(params: &TrajectoryParams, rng: &mut R) -> Result<Vec<CameraPose>> {
    params.validate()?;
    let start = match params.start_angle {
        Some(a) => a,
        None => rng.gen_range(0.0..std::f64::consts::TAU),
    };
    let (angles, arc) = params.frame_parameters(start);
    let path = params.path_kernel.sample_paths(&arc, 2, rng);
    let focal = params.focal_kernel.sample_paths(&arc, 3, rng);
    let poses = angles
        .iter()
        .enumerate()
        .map(|(i, &ang)| {
            let base = params.base_position(ang);
            let position = Vec3::new(base.x + path[0][i], params.camera_height, base.z + path[1][i]);
            let focal_point = params.focal_mean + Vec3::new(focal[0][i], focal[1][i], focal[2][i]);
            CameraPose { position, focal_point }
        })
        .collect::<Vec<_>>();
    for p in &poses {
        p.validate()?;
    }
    Ok(poses)
}
