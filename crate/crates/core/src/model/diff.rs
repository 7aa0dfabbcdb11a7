//! Attribution of detections to hypothesized objects.
//!
//! Objects are projected into the frame. Each detection is matched to the
//! nearest visible projected object of the same category within the
//! matching radius (ties go to the lower object index). An object may absorb
//! any number of detections. Unmatched detections are hallucinations; a
//! visible object with no matched detection is a miss.

use serde::{Deserialize, Serialize};

use super::{Detection2D, FrameObservation, WorldState};
use crate::geometry::{CameraIntrinsics, PinholeCamera};

/// A visible object and how many detections it received in one frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectEvent {
    /// Index into the world's object list.
    pub object: usize,
    pub category: usize,
    pub matches: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffResult {
    /// Unmatched detections per category.
    pub hallucinations: Vec<u32>,
    /// One entry per object visible in the frame.
    pub events: Vec<ObjectEvent>,
}

impl DiffResult {
    pub fn total_hallucinations(&self) -> u32 {
        self.hallucinations.iter().sum()
    }

    pub fn total_matches(&self) -> u32 {
        self.events.iter().map(|e| e.matches).sum()
    }
}

/// Per-detection assignment within one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameMatch {
    /// For each detection, the matched object and squared pixel distance.
    pub assignment: Vec<Option<(usize, f64)>>,
    /// Visible projection of every object, `None` when out of view.
    pub projections: Vec<Option<(f64, f64)>>,
}

impl FrameMatch {
    pub fn compute(
        world: &WorldState,
        camera: &PinholeCamera,
        detections: &[Detection2D],
        radius: f64,
    ) -> Self {
        let projections: Vec<_> = world
            .objects
            .iter()
            .map(|o| camera.project_visible(&o.position))
            .collect();
        let assignment = match_detections(world, &projections, detections, radius);
        FrameMatch {
            assignment,
            projections,
        }
    }

    pub fn to_diff(&self, world: &WorldState, detections: &[Detection2D], num_categories: usize) -> DiffResult {
        let mut hallucinations = vec![0u32; num_categories];
        let mut per_object = vec![0u32; world.objects.len()];
        for (d, a) in detections.iter().zip(&self.assignment) {
            match a {
                Some((obj, _)) => per_object[*obj] += 1,
                None => hallucinations[d.category] += 1,
            }
        }
        let events = self
            .projections
            .iter()
            .enumerate()
            .filter(|(_, p)| p.is_some())
            .map(|(i, _)| ObjectEvent {
                object: i,
                category: world.objects[i].category,
                matches: per_object[i],
            })
            .collect();
        DiffResult {
            hallucinations,
            events,
        }
    }
}

/// Nearest same-category visible object within `radius` for each detection.
pub fn match_detections(
    world: &WorldState,
    projections: &[Option<(f64, f64)>],
    detections: &[Detection2D],
    radius: f64,
) -> Vec<Option<(usize, f64)>> {
    let r2 = radius * radius;
    detections
        .iter()
        .map(|d| {
            let mut best: Option<(usize, f64)> = None;
            for (i, (obj, proj)) in world.objects.iter().zip(projections).enumerate() {
                if obj.category != d.category {
                    continue;
                }
                let Some((px, py)) = proj else { continue };
                let dx = d.x - px;
                let dy = d.y - py;
                let s = dx * dx + dy * dy;
                if s <= r2 && best.map_or(true, |(_, b)| s < b) {
                    best = Some((i, s));
                }
            }
            best
        })
        .collect()
}

/// Diff a hypothesized world against one frame's detections.
pub fn diff_world_detections(
    world: &WorldState,
    frame: &FrameObservation,
    intr: &CameraIntrinsics,
    radius: f64,
    num_categories: usize,
) -> DiffResult {
    let camera = PinholeCamera::new(&frame.camera, intr);
    FrameMatch::compute(world, &camera, &frame.detections, radius).to_diff(world, &frame.detections, num_categories)
}
