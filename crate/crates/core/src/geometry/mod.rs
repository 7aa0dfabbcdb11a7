//! Cameras, rays, room bounds and camera trajectories.

mod camera;
mod trajectory;

pub use camera::{
    backproject, is_visible, project, CameraIntrinsics, CameraPose, PinholeCamera, Ray,
};
pub use trajectory::{sample_trajectory, RbfKernel, TrajectoryParams};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Axis-aligned box. The default is a 12 x 8 footprint (x by z) and 3 units
/// of height, floor at `y = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoomBounds {
    pub min: Vec3,
    pub max: Vec3,
}

impl Default for RoomBounds {
    fn default() -> Self {
        RoomBounds {
            min: Vec3::new(-6.0, 0.0, -4.0),
            max: Vec3::new(6.0, 3.0, 4.0),
        }
    }
}

impl RoomBounds {
    pub fn new(min: Vec3, max: Vec3) -> Result<Self> {
        let b = RoomBounds { min, max };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = (0..3).all(|i| {
            self.min[i].is_finite() && self.max[i].is_finite() && self.max[i] > self.min[i]
        });
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!(
                "room bounds must have positive extent on every axis, got {:?}..{:?}",
                self.min.as_slice(),
                self.max.as_slice()
            )))
        }
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn volume(&self) -> f64 {
        let e = self.extent();
        e.x * e.y * e.z
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }
}
