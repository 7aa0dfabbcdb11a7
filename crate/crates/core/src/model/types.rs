use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CameraPose, Vec3};

/// Ordered, unique category labels. Indices are stable for a run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct CategoryTable {
    names: Vec<String>,
}

impl CategoryTable {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() {
            return Err(Error::config("category table must not be empty"));
        }
        let mut seen = HashSet::new();
        for n in &names {
            if !seen.insert(n.as_str()) {
                return Err(Error::config(format!("duplicate category label {n:?}")));
            }
        }
        Ok(CategoryTable { names })
    }

    /// The five categories used throughout the experiments.
    pub fn default_five() -> Self {
        CategoryTable::new(["potted plant", "chair", "bowl", "tv", "umbrella"]).unwrap()
    }

    /// `n` generic labels `c0..c{n-1}`.
    pub fn numbered(n: usize) -> Result<Self> {
        CategoryTable::new((0..n).map(|i| format!("c{i}")))
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, idx: usize) -> Option<&str> {
        self.names.get(idx).map(String::as_str)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

impl TryFrom<Vec<String>> for CategoryTable {
    type Error = Error;
    fn try_from(v: Vec<String>) -> Result<Self> {
        CategoryTable::new(v)
    }
}

impl From<CategoryTable> for Vec<String> {
    fn from(t: CategoryTable) -> Self {
        t.names
    }
}

/// Detector error parameters: per-category hallucination rate (expected
/// hallucinations per frame) and detection rate `p`, with miss rate `1 - p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theta {
    pub hallucination: Vec<f64>,
    pub detection: Vec<f64>,
}

impl Theta {
    pub fn new(hallucination: Vec<f64>, detection: Vec<f64>) -> Result<Self> {
        let t = Theta {
            hallucination,
            detection,
        };
        t.validate()?;
        Ok(t)
    }

    /// Same rates for every category.
    pub fn uniform(n: usize, hallucination: f64, detection: f64) -> Result<Self> {
        Theta::new(vec![hallucination; n], vec![detection; n])
    }

    pub fn num_categories(&self) -> usize {
        self.hallucination.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.hallucination.len() != self.detection.len() || self.hallucination.is_empty() {
            return Err(Error::config(format!(
                "theta vectors must be non-empty and equal length ({} vs {})",
                self.hallucination.len(),
                self.detection.len()
            )));
        }
        if let Some(l) = self.hallucination.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
            return Err(Error::config(format!("hallucination rate {l} is not a non-negative real")));
        }
        if let Some(p) = self.detection.iter().find(|p| !(**p >= 0.0 && **p < 1.0)) {
            return Err(Error::config(format!("detection rate {p} is outside [0, 1)")));
        }
        Ok(())
    }

    pub fn miss_rate(&self, c: usize) -> f64 {
        1.0 - self.detection[c]
    }

    pub fn miss_rates(&self) -> Vec<f64> {
        self.detection.iter().map(|p| 1.0 - p).collect()
    }

    pub fn total_hallucination(&self) -> f64 {
        self.hallucination.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Object3D {
    pub position: Vec3,
    pub category: usize,
}

impl Object3D {
    pub fn new(position: Vec3, category: usize) -> Self {
        Object3D { position, category }
    }
}

/// The fixed set of objects in one scene.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub objects: Vec<Object3D>,
}

impl WorldState {
    pub fn new(objects: Vec<Object3D>) -> Self {
        WorldState { objects }
    }

    pub fn empty() -> Self {
        WorldState::default()
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    /// Category labels as a multiset (sorted indices).
    pub fn category_multiset(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.objects.iter().map(|o| o.category).collect();
        v.sort_unstable();
        v
    }

    pub fn validate(&self, num_categories: usize) -> Result<()> {
        for o in &self.objects {
            if o.category >= num_categories {
                return Err(Error::data(format!(
                    "object category {} out of range for {num_categories} categories",
                    o.category
                )));
            }
            if !o.position.iter().all(|v| v.is_finite()) {
                return Err(Error::data("object position is not finite"));
            }
        }
        Ok(())
    }
}

/// One detection: pixel coordinates and a category index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection2D {
    pub x: f64,
    pub y: f64,
    pub category: usize,
}

impl Detection2D {
    pub fn new(x: f64, y: f64, category: usize) -> Self {
        Detection2D { x, y, category }
    }
}

/// Ground-truth bounding box, used only for evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthBox {
    pub center: (f64, f64),
    pub half_width: f64,
    pub half_height: f64,
    pub category: usize,
}

impl GroundTruthBox {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        (x - self.center.0).abs() <= self.half_width && (y - self.center.1).abs() <= self.half_height
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameObservation {
    pub camera: CameraPose,
    pub detections: Vec<Detection2D>,
}

/// All frames of one scene. The ground-truth fields are for evaluation and
/// are never read by inference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneData {
    pub frames: Vec<FrameObservation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<WorldState>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth_boxes: Option<Vec<Vec<GroundTruthBox>>>,
}

impl SceneData {
    pub fn new(frames: Vec<FrameObservation>) -> Self {
        SceneData {
            frames,
            ground_truth: None,
            truth_boxes: None,
        }
    }

    pub fn num_detections(&self) -> usize {
        self.frames.iter().map(|f| f.detections.len()).sum()
    }

    /// Detections per category summed over all frames.
    pub fn category_counts(&self, num_categories: usize) -> Vec<usize> {
        let mut counts = vec![0; num_categories];
        for d in self.frames.iter().flat_map(|f| &f.detections) {
            if d.category < num_categories {
                counts[d.category] += 1;
            }
        }
        counts
    }

    pub fn validate(&self, num_categories: usize) -> Result<()> {
        if self.frames.is_empty() {
            return Err(Error::data("scene has no frames"));
        }
        for (i, f) in self.frames.iter().enumerate() {
            f.camera
                .validate()
                .map_err(|e| Error::data(format!("frame {i}: {e}")))?;
            for d in &f.detections {
                if d.category >= num_categories {
                    return Err(Error::data(format!(
                        "frame {i}: detection category {} out of range",
                        d.category
                    )));
                }
                if !(d.x.is_finite() && d.y.is_finite()) {
                    return Err(Error::data(format!("frame {i}: non-finite detection")));
                }
            }
        }
        Ok(())
    }
}
