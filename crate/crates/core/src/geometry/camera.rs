use serde::{Deserialize, Serialize};

use super::{RoomBounds, Vec3};
use crate::error::{Error, Result};

/// Image size and vertical field of view.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CameraIntrinsics {
    pub width: u32,
    pub height: u32,
    /// Degrees, in (0, 180).
    pub vertical_fov: f64,
}

impl Default for CameraIntrinsics {
    fn default() -> Self {
        CameraIntrinsics {
            width: 800,
            height: 800,
            vertical_fov: 60.0,
        }
    }
}

impl CameraIntrinsics {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::config("image dimensions must be positive"));
        }
        if !(self.vertical_fov > 0.0 && self.vertical_fov < 180.0) {
            return Err(Error::config(format!(
                "vertical fov must lie in (0, 180) degrees, got {}",
                self.vertical_fov
            )));
        }
        Ok(())
    }

    /// Focal length in pixels.
    pub fn focal_px(&self) -> f64 {
        0.5 * self.height as f64 / (0.5 * self.vertical_fov.to_radians()).tan()
    }

    pub fn center(&self) -> (f64, f64) {
        (0.5 * self.width as f64, 0.5 * self.height as f64)
    }

    pub fn area(&self) -> f64 {
        self.width as f64 * self.height as f64
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= 0.0 && x <= self.width as f64 && y >= 0.0 && y <= self.height as f64
    }
}

/// Camera position and the point it looks at. Up is +y.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraPose {
    pub position: Vec3,
    pub focal_point: Vec3,
}

impl CameraPose {
    pub fn new(position: Vec3, focal_point: Vec3) -> Result<Self> {
        let pose = CameraPose {
            position,
            focal_point,
        };
        pose.validate()?;
        Ok(pose)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.position.iter().chain(self.focal_point.iter()).all(|v| v.is_finite());
        if !finite {
            return Err(Error::data("camera pose has non-finite coordinates"));
        }
        if (self.focal_point - self.position).norm() == 0.0 {
            return Err(Error::data("camera position coincides with its focal point"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    /// Unit length.
    pub direction: Vec3,
}

impl Ray {
    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }

    /// Parameter interval `[t0, t1]` (with `t0 >= 0`) over which the ray lies
    /// inside `bounds`, if any.
    pub fn clip(&self, bounds: &RoomBounds) -> Option<(f64, f64)> {
        let mut t0 = 0.0_f64;
        let mut t1 = f64::INFINITY;
        for i in 0..3 {
            let o = self.origin[i];
            let d = self.direction[i];
            if d.abs() < 1e-15 {
                if o < bounds.min[i] || o > bounds.max[i] {
                    return None;
                }
                continue;
            }
            let a = (bounds.min[i] - o) / d;
            let b = (bounds.max[i] - o) / d;
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            t0 = t0.max(lo);
            t1 = t1.min(hi);
            if t0 > t1 {
                return None;
            }
        }
        (t1 > t0).then_some((t0, t1))
    }
}

/// A posed pinhole camera with its orthonormal basis precomputed.
#[derive(Debug, Clone, Copy)]
pub struct PinholeCamera {
    origin: Vec3,
    forward: Vec3,
    right: Vec3,
    up: Vec3,
    focal: f64,
    cx: f64,
    cy: f64,
    intrinsics: CameraIntrinsics,
}

impl PinholeCamera {
    pub fn new(pose: &CameraPose, intrinsics: &CameraIntrinsics) -> Self {
        let forward = (pose.focal_point - pose.position).normalize();
        let world_up = Vec3::new(0.0, 1.0, 0.0);
        let mut right = forward.cross(&world_up);
        if right.norm() < 1e-12 {
            // looking straight up or down
            right = Vec3::new(1.0, 0.0, 0.0);
        }
        let right = right.normalize();
        let up = right.cross(&forward);
        let (cx, cy) = intrinsics.center();
        PinholeCamera {
            origin: pose.position,
            forward,
            right,
            up,
            focal: intrinsics.focal_px(),
            cx,
            cy,
            intrinsics: *intrinsics,
        }
    }

    pub fn intrinsics(&self) -> &CameraIntrinsics {
        &self.intrinsics
    }

    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    /// Pixel coordinates of `point`, or `None` when it is not in front of
    /// the camera plane. The y axis points down the image.
    #[inline]
    pub fn project(&self, point: &Vec3) -> Option<(f64, f64)> {
        let d = point - self.origin;
        let z = d.dot(&self.forward);
        if z <= 0.0 {
            return None;
        }
        let x = self.cx + self.focal * d.dot(&self.right) / z;
        let y = self.cy - self.focal * d.dot(&self.up) / z;
        Some((x, y))
    }

    /// Projection restricted to the image rectangle.
    #[inline]
    pub fn project_visible(&self, point: &Vec3) -> Option<(f64, f64)> {
        self.project(point)
            .filter(|&(x, y)| self.intrinsics.contains(x, y))
    }

    pub fn backproject(&self, x: f64, y: f64) -> Ray {
        let dir = self.forward + self.right * ((x - self.cx) / self.focal)
            - self.up * ((y - self.cy) / self.focal);
        Ray {
            origin: self.origin,
            direction: dir.normalize(),
        }
    }
}

pub fn project(point: &Vec3, pose: &CameraPose, intr: &CameraIntrinsics) -> Option<(f64, f64)> {
    PinholeCamera::new(pose, intr).project(point)
}

pub fn is_visible(point: &Vec3, pose: &CameraPose, intr: &CameraIntrinsics) -> bool {
    PinholeCamera::new(pose, intr).project_visible(point).is_some()
}

pub fn backproject(pixel: (f64, f64), pose: &CameraPose, intr: &CameraIntrinsics) -> Ray {
    PinholeCamera::new(pose, intr).backproject(pixel.0, pixel.1)
}
