//! Closed-loop experiment with the full 3D model: learn rates on a training
//! split under several scene orders, then re-infer the held-out scenes with
//! the learned rates and with the lesioned ones, and score both against the
//! raw detections.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{
    accuracy_3d, full_theta_mse, ground_truth_theta, paired_bootstrap, video_accuracy_2d, world_points,
    BootstrapInterval,
};
use crate::generative::NoiseModel;
use crate::geometry::{CameraIntrinsics, CameraPose};
use crate::inference::{reinfer, run_filter, FilterConfig, MoveStats};
use crate::model::{SceneData, Theta, WorldState};
use crate::rng::{self, derive_seed, stage};

/// Rates the lesioned model holds fixed: the prior means.
pub fn lesioned_theta(num_categories: usize) -> Theta {
    Theta {
        hallucination: vec![1.0; num_categories],
        detection: vec![0.5; num_categories],
    }
}

/// The four counterbalanced training orders of `n` scenes: as given,
/// reversed, second half then first half, and first half reversed then
/// second half.
pub fn training_orders(n: usize) -> [Vec<usize>; 4] {
    let identity: Vec<usize> = (0..n).collect();
    let reversed: Vec<usize> = identity.iter().rev().copied().collect();
    let half = n / 2;
    let rotated: Vec<usize> = (half..n).chain(0..half).collect();
    let first_reversed: Vec<usize> = (0..half).rev().chain(half..n).collect();
    [identity, reversed, rotated, first_reversed]
}

/// Training and test sizes for `n` scenes. Both parts are non-empty.
pub fn split_sizes(n: usize, train_fraction: f64) -> Result<(usize, usize)> {
    if n < 2 {
        return Err(Error::config("the experiment needs at least two scenes"));
    }
    let train = ((n as f64 * train_fraction).round() as usize).clamp(1, n - 1);
    Ok((train, n - train))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    /// Re-inference with the learned rates.
    Metacog,
    /// Re-inference with the rates fixed at the prior means.
    Lesioned,
    /// The detector's own output, frame by frame.
    Detections,
}

impl Model {
    pub fn name(self) -> &'static str {
        match self {
            Model::Metacog => "metacog",
            Model::Lesioned => "lesioned",
            Model::Detections => "detections",
        }
    }
}

/// Scores of one model on one held-out scene under one training order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneScore {
    pub order: usize,
    /// Index into the full scene list.
    pub scene: usize,
    pub model: Model,
    pub accuracy_2d: Option<f64>,
    pub jaccard: Option<f64>,
    pub distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderReport {
    pub order: usize,
    /// Scene indices in the order they were learned from.
    pub sequence: Vec<usize>,
    /// Rate estimate after each training scene.
    pub theta_hat: Vec<Theta>,
    pub final_theta: Theta,
    /// Rate error after each training scene against the generating rates.
    pub mse_true: Option<Vec<f64>>,
    /// Rate error against rates measured from ground truth.
    pub mse_measured: Option<Vec<f64>>,
    pub ess: Vec<f64>,
    pub moves: MoveStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub model: Model,
    pub accuracy_2d: Option<f64>,
    pub jaccard: Option<f64>,
    pub distance: Option<f64>,
}

/// An inferred world, tagged with where it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferredWorld {
    pub order: usize,
    pub scene: usize,
    pub model: Model,
    pub world: WorldState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullReport {
    pub train_scenes: Vec<usize>,
    pub test_scenes: Vec<usize>,
    pub orders: Vec<OrderReport>,
    /// Rate error of the prior means against the generating rates.
    pub prior_mse_true: Option<f64>,
    pub prior_mse_measured: Option<f64>,
    /// Mean over orders of the rate error after each training step.
    pub mse_true_curve: Option<Vec<f64>>,
    pub mse_measured_curve: Option<Vec<f64>>,
    pub models: Vec<ModelSummary>,
    /// Paired bootstrap of per-scene 2D accuracy, metacog minus lesioned.
    pub versus_lesioned: Option<BootstrapInterval>,
    /// Paired bootstrap of per-scene 2D accuracy, metacog minus detections.
    pub versus_detections: Option<BootstrapInterval>,
    pub scores: Vec<SceneScore>,
    pub worlds: Vec<InferredWorld>,
    /// Set when rejuvenation is disabled, so no world or rate is ever
    /// revised and the results only reflect the initial draws.
    pub degenerate: bool,
}

impl FullReport {
    /// Relative drop of the rate error from the prior means to step
    /// `scenes` (1-based), against the generating rates.
    pub fn mse_reduction(&self, scenes: usize) -> Option<f64> {
        let curve = self.mse_true_curve.as_ref()?;
        let prior = self.prior_mse_true?;
        let v = curve.get(scenes.checked_sub(1)?)?;
        Some(1.0 - v / prior)
    }

    pub fn model(&self, m: Model) -> Option<&ModelSummary> {
        self.models.iter().find(|s| s.model == m)
    }
}

/// Inputs of the experiment besides the scenes.
#[derive(Debug, Clone)]
pub struct FullSetup<'a> {
    pub num_categories: usize,
    pub intrinsics: &'a CameraIntrinsics,
    pub noise: &'a NoiseModel,
    pub filter: &'a FilterConfig,
    pub theta_true: Option<&'a Theta>,
    pub train_fraction: f64,
    pub orders: usize,
    pub bootstrap_resamples: usize,
    pub seed: u64,
}

fn mean(v: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (s, n) = v.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

fn score_scene(scene: &SceneData, world: Option<&WorldState>, intr: &CameraIntrinsics) -> Result<(Option<f64>, Option<f64>, Option<f64>)> {
    let poses: Vec<CameraPose> = scene.frames.iter().map(|f| f.camera).collect();
    let acc2d = match &scene.truth_boxes {
        Some(boxes) => {
            let points = match world {
                Some(w) => world_points(w, &poses, intr),
                None => scene.frames.iter().map(|f| f.detections.clone()).collect(),
            };
            Some(video_accuracy_2d(&points, boxes)?)
        }
        None => None,
    };
    let (jac, dist) = match (world, &scene.ground_truth) {
        (Some(w), Some(t)) => {
            let (j, d) = accuracy_3d(w, t);
            (Some(j), d)
        }
        _ => (None, None),
    };
    Ok((acc2d, jac, dist))
}

/// Score every held-out scene for one model.
pub fn score_worlds(
    scenes: &[SceneData],
    test: &[usize],
    worlds: Option<&[WorldState]>,
    model: Model,
    order: usize,
    intr: &CameraIntrinsics,
) -> Result<Vec<SceneScore>> {
    test.iter()
        .enumerate()
        .map(|(k, &s)| {
            let (accuracy_2d, jaccard, distance) = score_scene(&scenes[s], worlds.map(|w| &w[k]), intr)?;
            Ok(SceneScore { order, scene: s, model, accuracy_2d, jaccard, distance })
        })
        .collect()
}

/// Per-model means of a score table.
pub fn summarize_scores(scores: &[SceneScore]) -> Vec<ModelSummary> {
    [Model::Metacog, Model::Lesioned, Model::Detections]
        .into_iter()
        .filter(|m| scores.iter().any(|s| s.model == *m))
        .map(|m| {
            let of = |f: fn(&SceneScore) -> Option<f64>| mean(scores.iter().filter(|s| s.model == m).filter_map(f));
            ModelSummary {
                model: m,
                accuracy_2d: of(|s| s.accuracy_2d),
                jaccard: of(|s| s.jaccard),
                distance: of(|s| s.distance),
            }
        })
        .collect()
}

/// Per-scene 2D accuracy averaged over orders, in `test` order.
fn per_scene_accuracy(scores: &[SceneScore], test: &[usize], model: Model) -> Option<Vec<f64>> {
    test.iter()
        .map(|&s| mean(scores.iter().filter(|x| x.scene == s && x.model == model).filter_map(|x| x.accuracy_2d)))
        .collect()
}

fn mean_curve(curves: &[Option<Vec<f64>>]) -> Option<Vec<f64>> {
    let curves: Vec<&Vec<f64>> = curves.iter().map(|c| c.as_ref()).collect::<Option<_>>()?;
    let len = curves.first()?.len();
    Some((0..len).map(|t| curves.iter().map(|c| c[t]).sum::<f64>() / curves.len() as f64).collect())
}

/// Run the experiment. Scenes are split in input order: the first part
/// trains, the rest is held out.
pub fn run_full_experiment(scenes: &[SceneData], setup: &FullSetup) -> Result<FullReport> {
    let n_c = setup.num_categories;
    for s in scenes {
        s.validate(n_c)?;
    }
    if !(1..=4).contains(&setup.orders) {
        return Err(Error::config("orders must be between 1 and 4"));
    }
    let (n_train, _) = split_sizes(scenes.len(), setup.train_fraction)?;
    let train: Vec<usize> = (0..n_train).collect();
    let test: Vec<usize> = (n_train..scenes.len()).collect();
    let test_scenes: Vec<SceneData> = test.iter().map(|&i| scenes[i].clone()).collect();
    let train_scenes: Vec<SceneData> = train.iter().map(|&i| scenes[i].clone()).collect();
    let measured = if train_scenes.iter().all(|s| s.ground_truth.is_some()) {
        Some(ground_truth_theta(&train_scenes, setup.intrinsics, setup.noise.radius, n_c)?)
    } else {
        None
    };
    let lesioned = lesioned_theta(n_c);
    let orders = training_orders(n_train);
    let mut reports = Vec::new();
    let mut scores = Vec::new();
    let mut worlds = Vec::new();
    scores.extend(score_worlds(scenes, &test, None, Model::Detections, 0, setup.intrinsics)?);
    for (k, sequence) in orders.iter().take(setup.orders).enumerate() {
        let ordered: Vec<SceneData> = sequence.iter().map(|&i| scenes[i].clone()).collect();
        let mut cfg = setup.filter.clone();
        cfg.seed = derive_seed(setup.seed, &[stage::ORDER, k as u64]);
        let run = run_filter(&ordered, n_c, &cfg, setup.intrinsics, setup.noise)?;
        let theta_hat = run.theta_trajectory();
        let mse_true = setup
            .theta_true
            .map(|t| theta_hat.iter().map(|h| full_theta_mse(h, t)).collect::<Result<Vec<_>>>())
            .transpose()?;
        let mse_measured = measured
            .as_ref()
            .map(|m| theta_hat.iter().map(|h| m.mse(h)).collect::<Result<Vec<_>>>())
            .transpose()?;
        let mut moves = MoveStats::default();
        for s in &run.scenes {
            moves.merge(&s.moves);
        }
        for (model, theta, tag) in [(Model::Metacog, &run.final_theta, 0u64), (Model::Lesioned, &lesioned, 1)] {
            let mut rcfg = setup.filter.clone();
            rcfg.seed = derive_seed(setup.seed, &[stage::REINFER, k as u64, tag]);
            let inferred = reinfer(&test_scenes, theta, &rcfg, setup.intrinsics, setup.noise)?;
            scores.extend(score_worlds(scenes, &test, Some(&inferred), model, k, setup.intrinsics)?);
            worlds.extend(
                test.iter()
                    .zip(inferred)
                    .map(|(&scene, world)| InferredWorld { order: k, scene, model, world }),
            );
        }
        reports.push(OrderReport {
            order: k,
            sequence: sequence.clone(),
            ess: run.scenes.iter().map(|s| s.ess).collect(),
            final_theta: run.final_theta.clone(),
            theta_hat,
            mse_true,
            mse_measured,
            moves,
        });
    }
    let bootstrap = |other: Model, tag: u64| -> Result<Option<BootstrapInterval>> {
        let a = per_scene_accuracy(&scores, &test, Model::Metacog);
        let b = per_scene_accuracy(&scores, &test, other);
        match (a, b) {
            (Some(a), Some(b)) => {
                let mut r = rng::stream(setup.seed, &[stage::BOOTSTRAP, tag]);
                Ok(Some(paired_bootstrap(&a, &b, setup.bootstrap_resamples, 0.95, &mut r)?))
            }
            _ => Ok(None),
        }
    };
    Ok(FullReport {
        prior_mse_true: setup.theta_true.map(|t| full_theta_mse(&lesioned, t)).transpose()?,
        prior_mse_measured: measured.as_ref().map(|m| m.mse(&lesioned)).transpose()?,
        mse_true_curve: mean_curve(&reports.iter().map(|r| r.mse_true.clone()).collect::<Vec<_>>()),
        mse_measured_curve: mean_curve(&reports.iter().map(|r| r.mse_measured.clone()).collect::<Vec<_>>()),
        models: summarize_scores(&scores),
        versus_lesioned: bootstrap(Model::Lesioned, 0)?,
        versus_detections: bootstrap(Model::Detections, 1)?,
        degenerate: setup.filter.rejuvenation_sweeps == 0,
        train_scenes: train,
        test_scenes: test,
        orders: reports,
        scores,
        worlds,
    })
}
