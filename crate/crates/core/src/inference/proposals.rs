//! Data-driven proposals for world edits.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, WeightedIndex};

use crate::error::{Error, Result};
use crate::generative::uniform_point;
use crate::geometry::{CameraIntrinsics, CameraPose, PinholeCamera, Ray, RoomBounds, Vec3};
use super::AddRule;
use crate::model::{Detection2D, SceneData, Theta};

/// Half the probability that `k` or more detections are all hallucinations
/// under the total rate `sum_c lambda_c`:
/// `0.5 * (1 - e^{-L} sum_{i=0}^{k} L^i / i!)`.
pub fn p_add(theta: &Theta, k: usize) -> f64 {
    0.5 * poisson_survival(theta.total_hallucination(), k)
}

/// Probability that a world edit proposes an addition.
pub fn add_probability(theta: &Theta, k: usize, rule: AddRule) -> f64 {
    match rule {
        AddRule::Stated => p_add(theta, k),
        AddRule::Complement => 0.5 * poisson_cdf(theta.total_hallucination(), k).clamp(0.0, 1.0),
    }
}

/// `P(X <= k)` for `X ~ Poisson(rate)`.
fn poisson_cdf(rate: f64, k: usize) -> f64 {
    if rate <= 0.0 {
        return 1.0;
    }
    let ln_rate = rate.ln();
    let mut log_term = -rate;
    let mut cdf = log_term.exp();
    for i in 1..=k {
        log_term += ln_rate - (i as f64).ln();
        cdf += log_term.exp();
    }
    cdf
}

/// `P(X > k)` for `X ~ Poisson(rate)`.
fn poisson_survival(rate: f64, k: usize) -> f64 {
    if rate <= 0.0 {
        return 0.0;
    }
    if (k as f64) < rate {
        return (1.0 - poisson_cdf(rate, k)).clamp(0.0, 1.0);
    }
    // Past the mode the tail is small, so sum it directly instead of
    // subtracting two nearly equal numbers.
    let ln_rate = rate.ln();
    let mut log_term = -rate + (k + 1) as f64 * ln_rate - ln_factorial(k + 1);
    let mut tail = 0.0;
    let mut i = k + 1;
    loop {
        let term = log_term.exp();
        tail += term;
        if term <= tail * 1e-17 {
            break;
        }
        i += 1;
        log_term += ln_rate - (i as f64).ln();
    }
    tail.clamp(0.0, 1.0)
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

/// Unnormalized category weights `max(1, k_c) p_c / (p_c + 1 - e^{-lambda_c})`.
pub fn category_weights(counts: &[usize], theta: &Theta) -> Vec<f64> {
    counts
        .iter()
        .zip(theta.detection.iter().zip(&theta.hallucination))
        .map(|(&k, (&p, &l))| {
            let denom = p + (-(-l).exp_m1()).max(0.0);
            if p <= 0.0 || denom <= 0.0 {
                0.0
            } else {
                k.max(1) as f64 * p / denom
            }
        })
        .collect()
}

/// Draw a category for a new object, biased toward categories that were
/// detected often and are believed to be detected reliably.
pub fn propose_category<R: Rng + ?Sized>(counts: &[usize], theta: &Theta, rng: &mut R) -> Result<usize> {
    let w = category_weights(counts, theta);
    let dist = WeightedIndex::new(&w)
        .map_err(|_| Error::DegenerateWeights(format!("category weights {w:?}")))?;
    Ok(dist.sample(rng))
}

/// A back-projected detection clipped to the room.
#[derive(Debug, Clone, Copy)]
pub struct SegmentRay {
    pub ray: Ray,
    pub t0: f64,
    pub t1: f64,
}

impl SegmentRay {
    pub fn new(ray: Ray, bounds: &RoomBounds) -> Option<Self> {
        let (t0, t1) = ray.clip(bounds)?;
        Some(SegmentRay { ray, t0, t1 })
    }

    /// Point at uniform depth along the segment with isotropic Gaussian
    /// displacement perpendicular to the ray.
    pub fn sample<R: Rng + ?Sized>(&self, sigma: f64, rng: &mut R) -> Vec3 {
        let t = rng.gen_range(self.t0..=self.t1);
        let (u, v) = orthonormal_pair(&self.ray.direction);
        let a: f64 = rng.sample(StandardNormal);
        let b: f64 = rng.sample(StandardNormal);
        self.ray.at(t) + u * (a * sigma) + v * (b * sigma)
    }

    pub fn log_density(&self, x: &Vec3, sigma: f64) -> f64 {
        let rel = x - self.ray.origin;
        let t = rel.dot(&self.ray.direction);
        if t < self.t0 || t > self.t1 {
            return f64::NEG_INFINITY;
        }
        let perp2 = (rel - self.ray.direction * t).norm_squared();
        let s2 = sigma * sigma;
        -(2.0 * std::f64::consts::PI * s2).ln() - perp2 / (2.0 * s2) - (self.t1 - self.t0).ln()
    }
}

fn orthonormal_pair(d: &Vec3) -> (Vec3, Vec3) {
    let helper = if d.x.abs() < 0.9 {
        Vec3::new(1.0, 0.0, 0.0)
    } else {
        Vec3::new(0.0, 1.0, 0.0)
    };
    let u = d.cross(&helper).normalize();
    let v = d.cross(&u);
    (u, v)
}

pub(crate) fn log_sum_exp2(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn log_mean_exp_iter(values: impl Iterator<Item = f64>, n: usize) -> f64 {
    let v: Vec<f64> = values.collect();
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + (v.iter().map(|x| (x - m).exp()).sum::<f64>() / n as f64).ln()
}

/// Per-scene proposal data: detection counts and clipped back-projected rays
/// grouped by category.
#[derive(Debug, Clone)]
pub struct SceneIndex {
    pub counts: Vec<usize>,
    pub total_detections: usize,
    rays: Vec<Vec<SegmentRay>>,
    bounds: RoomBounds,
    line_sigma: f64,
}

impl SceneIndex {
    pub fn new(
        scene: &SceneData,
        cameras: &[PinholeCamera],
        num_categories: usize,
        bounds: &RoomBounds,
        line_variance: f64,
    ) -> Self {
        let mut rays = vec![Vec::new(); num_categories];
        for (frame, cam) in scene.frames.iter().zip(cameras) {
            for d in &frame.detections {
                if let Some(seg) = SegmentRay::new(cam.backproject(d.x, d.y), bounds) {
                    rays[d.category].push(seg);
                }
            }
        }
        SceneIndex {
            counts: scene.category_counts(num_categories),
            total_detections: scene.num_detections(),
            rays,
            bounds: *bounds,
            line_sigma: line_variance.sqrt(),
        }
    }

    pub fn bounds(&self) -> &RoomBounds {
        &self.bounds
    }

    fn log_uniform(&self) -> f64 {
        -self.bounds.volume().ln()
    }

    /// Ray-based redraw for category `c`; uniform when `c` has no usable
    /// detections.
    pub fn sample_ray<R: Rng + ?Sized>(&self, c: usize, rng: &mut R) -> Vec3 {
        let rays = &self.rays[c];
        if rays.is_empty() {
            return uniform_point(&self.bounds, rng);
        }
        rays[rng.gen_range(0..rays.len())].sample(self.line_sigma, rng)
    }

    pub fn log_density_ray(&self, c: usize, x: &Vec3) -> f64 {
        let rays = &self.rays[c];
        if rays.is_empty() {
            return if self.bounds.contains(x) { self.log_uniform() } else { f64::NEG_INFINITY };
        }
        log_mean_exp_iter(rays.iter().map(|r| r.log_density(x, self.line_sigma)), rays.len())
    }

    /// Location for a new object: uniform over the room with probability
    /// 0.5, otherwise near a back-projected detection of category `c`.
    pub fn sample_location<R: Rng + ?Sized>(&self, c: usize, rng: &mut R) -> Vec3 {
        if self.rays[c].is_empty() || rng.gen::<f64>() < 0.5 {
            uniform_point(&self.bounds, rng)
        } else {
            self.sample_ray(c, rng)
        }
    }

    pub fn log_density_location(&self, c: usize, x: &Vec3) -> f64 {
        let uni = if self.bounds.contains(x) { self.log_uniform() } else { f64::NEG_INFINITY };
        if self.rays[c].is_empty() {
            return uni;
        }
        log_sum_exp2(uni, self.log_density_ray(c, x)) + 0.5f64.ln()
    }
}

/// Location proposal from a single detection: uniform over `bounds` with
/// probability 0.5 (always, when `detection` is `None` or its ray misses the
/// room), otherwise near the detection's back-projected ray.
pub fn propose_location<R: Rng + ?Sized>(
    detection: Option<&Detection2D>,
    pose: &CameraPose,
    intr: &CameraIntrinsics,
    bounds: &RoomBounds,
    line_variance: f64,
    rng: &mut R,
) -> Result<Vec3> {
    bounds.validate()?;
    if !(line_variance > 0.0) {
        return Err(Error::config("line proposal variance must be positive"));
    }
    let seg = detection.and_then(|d| SegmentRay::new(PinholeCamera::new(pose, intr).backproject(d.x, d.y), bounds));
    match seg {
        Some(seg) if rng.gen::<f64>() >= 0.5 => Ok(seg.sample(line_variance.sqrt(), rng)),
        _ => Ok(uniform_point(bounds, rng)),
    }
}
