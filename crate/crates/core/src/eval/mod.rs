//! Metrics: rate error, Jaccard similarity, faultiness, ground-truth rates,
//! 2D and 3D accuracy, and the curve/statistics helpers used by reports.

mod hungarian;
mod stats;

pub use hungarian::hungarian;
pub use stats::{
    faultiness_grid, grid, linear_regression, paired_bootstrap, rolling_accuracy_curve, AccuracyCurve,
    BootstrapInterval, Regression,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, CameraPose, PinholeCamera};
use crate::lightweight::{LwFrame, LwTheta, LwWorldState};
use crate::model::{diff_world_detections, Detection2D, GroundTruthBox, SceneData, Theta, WorldState};

fn mse(h_hat: &[f64], h: &[f64], m_hat: &[f64], m: &[f64]) -> Result<f64> {
    if h_hat.len() != h.len() || m_hat.len() != m.len() || h.len() != m.len() || h.is_empty() {
        return Err(Error::data("rate vectors differ in length"));
    }
    let s: f64 = h_hat
        .iter()
        .zip(h)
        .chain(m_hat.iter().zip(m))
        .map(|(a, b)| (a - b).powi(2))
        .sum();
    Ok(s / (2 * h.len()) as f64)
}

/// `1/(2|C|) * sum_c ((H_c - H^_c)^2 + (M_c - M^_c)^2)`.
pub fn theta_mse(theta_hat: &LwTheta, theta_true: &LwTheta) -> Result<f64> {
    mse(&theta_hat.hallucination, &theta_true.hallucination, &theta_hat.miss, &theta_true.miss)
}

/// The same formula for the full model, with `M = 1 - p` and `H = lambda`.
pub fn full_theta_mse(theta_hat: &Theta, theta_true: &Theta) -> Result<f64> {
    let miss = |t: &Theta| t.detection.iter().map(|p| 1.0 - p).collect::<Vec<_>>();
    mse(&theta_hat.hallucination, &theta_true.hallucination, &miss(theta_hat), &miss(theta_true))
}

/// Multiset Jaccard similarity of two category lists. Two empty lists score 1.
pub fn jaccard(inferred: &[usize], truth: &[usize]) -> f64 {
    let max = inferred.iter().chain(truth).copied().max().map_or(0, |m| m + 1);
    let mut a = vec![0usize; max];
    let mut b = vec![0usize; max];
    for &c in inferred {
        a[c] += 1;
    }
    for &c in truth {
        b[c] += 1;
    }
    let inter: usize = a.iter().zip(&b).map(|(x, y)| x.min(y)).sum();
    let union: usize = a.iter().zip(&b).map(|(x, y)| x.max(y)).sum();
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// Jaccard similarity of two presence vectors.
pub fn jaccard_presence(inferred: &LwWorldState, truth: &LwWorldState) -> f64 {
    jaccard(&inferred.categories(), &truth.categories())
}

/// Mean per-bit disagreement between frames and the world.
pub fn faultiness(frames: &[LwFrame], world: &LwWorldState) -> Result<f64> {
    if frames.is_empty() {
        return Err(Error::data("faultiness needs at least one frame"));
    }
    let c = world.presence.len();
    let mut wrong = 0usize;
    for f in frames {
        if f.detected.len() != c {
            return Err(Error::data("frame and world differ in length"));
        }
        wrong += f.detected.iter().zip(&world.presence).filter(|(a, b)| a != b).count();
    }
    Ok(wrong as f64 / (frames.len() * c) as f64)
}

/// Empirical error rates of a detector measured against ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthTheta {
    /// Hallucinated detections per frame.
    pub hallucination: Vec<f64>,
    /// Fraction of in-view objects that got no detection; `None` when the
    /// category was never in view.
    pub miss: Vec<Option<f64>>,
    pub frames: usize,
    pub in_view: Vec<u64>,
}

impl GroundTruthTheta {
    /// Rate error of a full-model estimate against these rates. Categories
    /// that were never in view contribute only their hallucination term.
    pub fn mse(&self, theta_hat: &Theta) -> Result<f64> {
        let n = self.hallucination.len();
        if theta_hat.num_categories() != n {
            return Err(Error::data("rate vectors differ in length"));
        }
        let mut s = 0.0;
        let mut terms = 0usize;
        for c in 0..n {
            s += (theta_hat.hallucination[c] - self.hallucination[c]).powi(2);
            terms += 1;
            if let Some(m) = self.miss[c] {
                s += (1.0 - theta_hat.detection[c] - m).powi(2);
                terms += 1;
            }
        }
        Ok(s / terms as f64)
    }
}

/// Measure hallucination and miss rates of the detections in `scenes`
/// against their ground-truth worlds, using the same matching rule as
/// inference.
pub fn ground_truth_theta(
    scenes: &[SceneData],
    intr: &CameraIntrinsics,
    radius: f64,
    num_categories: usize,
) -> Result<GroundTruthTheta> {
    let mut halluc = vec![0u64; num_categories];
    let mut misses = vec![0u64; num_categories];
    let mut in_view = vec![0u64; num_categories];
    let mut frames = 0usize;
    for (i, scene) in scenes.iter().enumerate() {
        let truth = scene
            .ground_truth
            .as_ref()
            .ok_or_else(|| Error::data(format!("scene {i} has no ground truth")))?;
        for frame in &scene.frames {
            let d = diff_world_detections(truth, frame, intr, radius, num_categories);
            for (c, h) in d.hallucinations.iter().enumerate() {
                halluc[c] += *h as u64;
            }
            for e in &d.events {
                in_view[e.category] += 1;
                if e.matches == 0 {
                    misses[e.category] += 1;
                }
            }
            frames += 1;
        }
    }
    if frames == 0 {
        return Err(Error::data("no frames to measure"));
    }
    Ok(GroundTruthTheta {
        hallucination: halluc.iter().map(|&h| h as f64 / frames as f64).collect(),
        miss: misses
            .iter()
            .zip(&in_view)
            .map(|(&m, &v)| (v > 0).then(|| m as f64 / v as f64))
            .collect(),
        frames,
        in_view,
    })
}

/// Visible projections of a world's objects, one list per pose.
pub fn world_points(world: &WorldState, poses: &[CameraPose], intr: &CameraIntrinsics) -> Vec<Vec<Detection2D>> {
    poses
        .iter()
        .map(|pose| {
            let cam = PinholeCamera::new(pose, intr);
            world
                .objects
                .iter()
                .filter_map(|o| cam.project_visible(&o.position).map(|(x, y)| Detection2D::new(x, y, o.category)))
                .collect()
        })
        .collect()
}

/// Score of one frame: per category, points are paired with box centers by
/// minimum total distance; a pair counts when its point lies in its box.
/// The score is counted pairs over (pairs + unpaired points + unpaired
/// boxes). An empty frame with no boxes scores 1.
pub fn frame_accuracy_2d(points: &[Detection2D], boxes: &[GroundTruthBox]) -> f64 {
    let max_c = points
        .iter()
        .map(|p| p.category)
        .chain(boxes.iter().map(|b| b.category))
        .max();
    let Some(max_c) = max_c else { return 1.0 };
    let mut hits = 0usize;
    let mut denom = 0usize;
    for c in 0..=max_c {
        let pts: Vec<&Detection2D> = points.iter().filter(|p| p.category == c).collect();
        let bxs: Vec<&GroundTruthBox> = boxes.iter().filter(|b| b.category == c).collect();
        if pts.is_empty() && bxs.is_empty() {
            continue;
        }
        let pairs = if pts.is_empty() || bxs.is_empty() {
            Vec::new()
        } else {
            let cost: Vec<Vec<f64>> = pts
                .iter()
                .map(|p| bxs.iter().map(|b| (p.x - b.center.0).hypot(p.y - b.center.1)).collect())
                .collect();
            hungarian(&cost)
        };
        hits += pairs.iter().filter(|&&(i, j)| bxs[j].contains(pts[i].x, pts[i].y)).count();
        denom += pts.len() + bxs.len() - pairs.len();
    }
    if denom == 0 {
        1.0
    } else {
        hits as f64 / denom as f64
    }
}

/// Mean frame score of one video.
pub fn video_accuracy_2d(points: &[Vec<Detection2D>], boxes: &[Vec<GroundTruthBox>]) -> Result<f64> {
    if points.len() != boxes.len() || points.is_empty() {
        return Err(Error::data("points and boxes must cover the same non-empty set of frames"));
    }
    Ok(points.iter().zip(boxes).map(|(p, b)| frame_accuracy_2d(p, b)).sum::<f64>() / points.len() as f64)
}

/// Mean video score over videos.
pub fn accuracy_2d(videos: &[(Vec<Vec<Detection2D>>, Vec<Vec<GroundTruthBox>>)]) -> Result<f64> {
    if videos.is_empty() {
        return Err(Error::data("no videos to score"));
    }
    let mut s = 0.0;
    for (p, b) in videos {
        s += video_accuracy_2d(p, b)?;
    }
    Ok(s / videos.len() as f64)
}

/// Category Jaccard plus the mean distance over same-category pairs found by
/// minimum-distance assignment (`None` when nothing pairs up).
pub fn accuracy_3d(inferred: &WorldState, truth: &WorldState) -> (f64, Option<f64>) {
    let j = jaccard(&inferred.category_multiset(), &truth.category_multiset());
    let cats: Vec<usize> = {
        let mut v: Vec<usize> = inferred.objects.iter().chain(&truth.objects).map(|o| o.category).collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    let mut total = 0.0;
    let mut pairs = 0usize;
    for c in cats {
        let a: Vec<_> = inferred.objects.iter().filter(|o| o.category == c).collect();
        let b: Vec<_> = truth.objects.iter().filter(|o| o.category == c).collect();
        if a.is_empty() || b.is_empty() {
            continue;
        }
        let cost: Vec<Vec<f64>> = a.iter().map(|x| b.iter().map(|y| (x.position - y.position).norm()).collect()).collect();
        for (i, k) in hungarian(&cost) {
            total += cost[i][k];
            pairs += 1;
        }
    }
    (j, (pairs > 0).then(|| total / pairs as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;
    use crate::model::Object3D;

    fn bx(x: f64, y: f64, c: usize) -> GroundTruthBox {
        GroundTruthBox {
            center: (x, y),
            half_width: 50.0,
            half_height: 50.0,
            category: c,
        }
    }

    #[test]
    fn jaccard_examples() {
        assert_eq!(jaccard(&[0, 0, 1], &[0, 1]), 2.0 / 3.0);
        assert_eq!(jaccard(&[], &[]), 1.0);
        assert_eq!(jaccard(&[1], &[2]), 0.0);
    }

    #[test]
    fn mse_example() {
        let a = LwTheta::new(vec![0.1], vec![0.2]).unwrap();
        let b = LwTheta::new(vec![0.2], vec![0.4]).unwrap();
        assert!((theta_mse(&a, &b).unwrap() - 0.025).abs() < 1e-15);
    }

    #[test]
    fn faultiness_examples() {
        let w = LwWorldState { presence: vec![true, false, false, true, false] };
        let f = LwFrame { detected: vec![true, true, false, true, false] };
        assert!((faultiness(&[f], &w).unwrap() - 0.2).abs() < 1e-15);
        assert!(faultiness(&[], &w).is_err());
    }

    #[test]
    fn accuracy_2d_examples() {
        let boxes = vec![bx(100.0, 100.0, 0), bx(400.0, 400.0, 0)];
        let one = vec![Detection2D::new(100.0, 100.0, 0)];
        assert_eq!(frame_accuracy_2d(&one, &boxes), 0.5);
        let outside = vec![Detection2D::new(300.0, 300.0, 1)];
        assert_eq!(frame_accuracy_2d(&outside, &[bx(100.0, 100.0, 1)]), 0.0);
        assert_eq!(frame_accuracy_2d(&[], &[]), 1.0);
    }

    #[test]
    fn accuracy_3d_offset() {
        let a = WorldState::new(vec![Object3D::new(Vec3::new(0.3, 0.0, 0.4), 2)]);
        let b = WorldState::new(vec![Object3D::new(Vec3::zeros(), 2)]);
        let (j, d) = accuracy_3d(&a, &b);
        assert_eq!(j, 1.0);
        assert!((d.unwrap() - 0.5).abs() < 1e-12);
        let c = WorldState::new(vec![Object3D::new(Vec3::zeros(), 1)]);
        assert_eq!(accuracy_3d(&c, &b), (0.0, None));
    }
}
