//! Robustness study of the spatial-free model: per-detector evaluation and
//! aggregation into the learning, accuracy and faultiness curves.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{
    faultiness, faultiness_grid, jaccard_presence, linear_regression, rolling_accuracy_curve, theta_mse,
    AccuracyCurve, Regression,
};
use crate::lightweight::{lw_reinfer, lw_run_filter, LwConfig, LwDetectorData, LwTheta};
use crate::rng::{derive_seed, stage};

/// Everything measured on one detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LwDetectorReport {
    pub id: u64,
    pub theta_true: LwTheta,
    pub theta_final: LwTheta,
    /// Rate error after each world.
    pub mse: Vec<f64>,
    /// Rate error of the prior mean.
    pub lesioned_mse: f64,
    /// Faultiness of each world's frames.
    pub faultiness: Vec<f64>,
    /// Per-world accuracy of the online estimate.
    pub learning_accuracy: Vec<f64>,
    /// Per-world accuracy after re-inference with the final rates.
    pub final_accuracy: Vec<f64>,
    /// Per-world accuracy with rates fixed at the prior mean.
    pub lesioned_accuracy: Vec<f64>,
}

impl LwDetectorReport {
    pub fn mean_faultiness(&self) -> f64 {
        mean(&self.faultiness)
    }

    pub fn final_mse(&self) -> f64 {
        *self.mse.last().expect("at least one world")
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Run the online filter, the final re-inference and the lesioned model on
/// one detector. The filter seed is derived from `seed` and the detector id.
pub fn evaluate_lw_detector(data: &LwDetectorData, cfg: &LwConfig, seed: u64) -> Result<LwDetectorReport> {
    let theta_true = data
        .theta
        .clone()
        .ok_or_else(|| Error::data(format!("detector {} has no true rates", data.id)))?;
    let truths = data
        .worlds
        .iter()
        .enumerate()
        .map(|(t, w)| {
            w.truth
                .as_ref()
                .ok_or_else(|| Error::data(format!("detector {} world {t} has no ground truth", data.id)))
        })
        .collect::<Result<Vec<_>>>()?;
    let frames = data.frames();
    let mut run_cfg = cfg.clone();
    run_cfg.seed = derive_seed(seed, &[stage::DETECTOR, data.id]);
    let run = lw_run_filter(&frames, &run_cfg)?;
    let n = theta_true.num_categories();
    let prior = LwTheta::uniform(n, cfg.prior_mean(), cfg.prior_mean());
    let final_worlds = lw_reinfer(&frames, &run.final_theta, &run_cfg)?;
    let lesioned_worlds = lw_reinfer(&frames, &prior, &run_cfg)?;
    let acc = |ws: &[crate::lightweight::LwWorldState]| -> Vec<f64> {
        ws.iter().zip(&truths).map(|(w, t)| jaccard_presence(w, t)).collect()
    };
    Ok(LwDetectorReport {
        id: data.id,
        mse: run
            .theta_trajectory
            .iter()
            .map(|t| theta_mse(t, &theta_true))
            .collect::<Result<_>>()?,
        lesioned_mse: theta_mse(&prior, &theta_true)?,
        faultiness: data
            .worlds
            .iter()
            .zip(&truths)
            .map(|(w, t)| faultiness(&w.frames, t))
            .collect::<Result<_>>()?,
        learning_accuracy: acc(&run.worlds),
        final_accuracy: acc(&final_worlds),
        lesioned_accuracy: acc(&lesioned_worlds),
        theta_final: run.final_theta,
        theta_true,
    })
}

/// Evaluate many detectors in parallel; output order follows the input.
pub fn evaluate_lw_dataset(data: &[LwDetectorData], cfg: &LwConfig, seed: u64) -> Result<Vec<LwDetectorReport>> {
    data.par_iter().map(|d| evaluate_lw_detector(d, cfg, seed)).collect()
}

/// Curves aggregated over detectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LwSummary {
    pub detectors: usize,
    /// Mean rate error after each world.
    pub mse_curve: Vec<f64>,
    pub lesioned_mse: f64,
    /// Mean accuracy at each world index, per variant.
    pub learning_curve: Vec<f64>,
    pub final_curve: Vec<f64>,
    pub lesioned_curve: Vec<f64>,
    pub mean_learning_accuracy: f64,
    pub mean_final_accuracy: f64,
    pub mean_lesioned_accuracy: f64,
    /// Windowed accuracy against per-world faultiness.
    pub learning_by_faultiness: AccuracyCurve,
    pub final_by_faultiness: AccuracyCurve,
    pub lesioned_by_faultiness: AccuracyCurve,
    /// `(faultiness, final - lesioned)` on the grid points both curves cover.
    pub difference_by_faultiness: Vec<(f64, f64)>,
    /// Final rate error regressed on mean detector faultiness.
    pub mse_regression: Option<Regression>,
}

impl LwSummary {
    pub fn final_mse(&self) -> f64 {
        *self.mse_curve.last().unwrap_or(&f64::NAN)
    }

    /// Largest accuracy gain over the lesioned model and where it occurs.
    pub fn peak_difference(&self) -> Option<(f64, f64)> {
        self.difference_by_faultiness
            .iter()
            .copied()
            .max_by(|a, b| a.1.total_cmp(&b.1))
    }

    /// Smallest grid faultiness from which the gain stays positive up to the
    /// end of the grid.
    pub fn crossover(&self) -> Option<f64> {
        let d = &self.difference_by_faultiness;
        let mut start = None;
        for (x, v) in d {
            if *v > 0.0 {
                start.get_or_insert(*x);
            } else {
                start = None;
            }
        }
        start
    }
}

pub const ROLLING_HALF_WIDTH: f64 = 0.05;

pub fn summarize_lw(reports: &[LwDetectorReport]) -> Result<LwSummary> {
    if reports.is_empty() {
        return Err(Error::data("no detector reports to summarize"));
    }
    let len = reports.iter().map(|r| r.mse.len()).min().unwrap_or(0);
    let column = |f: &dyn Fn(&LwDetectorReport) -> &Vec<f64>| -> Vec<f64> {
        (0..len)
            .map(|t| reports.iter().map(|r| f(r)[t]).sum::<f64>() / reports.len() as f64)
            .collect()
    };
    let points = |f: &dyn Fn(&LwDetectorReport) -> &Vec<f64>| -> Vec<(f64, f64)> {
        reports
            .iter()
            .flat_map(|r| r.faultiness.iter().copied().zip(f(r).iter().copied()))
            .collect()
    };
    let grid = faultiness_grid();
    let learning_by = rolling_accuracy_curve(&points(&|r| &r.learning_accuracy), ROLLING_HALF_WIDTH, &grid);
    let final_by = rolling_accuracy_curve(&points(&|r| &r.final_accuracy), ROLLING_HALF_WIDTH, &grid);
    let lesioned_by = rolling_accuracy_curve(&points(&|r| &r.lesioned_accuracy), ROLLING_HALF_WIDTH, &grid);
    let difference = final_by
        .points
        .iter()
        .zip(&lesioned_by.points)
        .map(|(a, b)| {
            debug_assert_eq!(a.0, b.0);
            (a.0, a.1 - b.1)
        })
        .collect();
    let all_mean = |f: &dyn Fn(&LwDetectorReport) -> &Vec<f64>| -> f64 {
        let (s, n) = reports
            .iter()
            .fold((0.0, 0usize), |(s, n), r| (s + f(r).iter().sum::<f64>(), n + f(r).len()));
        s / n as f64
    };
    let x: Vec<f64> = reports.iter().map(|r| r.mean_faultiness()).collect();
    let y: Vec<f64> = reports.iter().map(|r| r.final_mse()).collect();
    Ok(LwSummary {
        detectors: reports.len(),
        mse_curve: column(&|r| &r.mse),
        lesioned_mse: reports.iter().map(|r| r.lesioned_mse).sum::<f64>() / reports.len() as f64,
        learning_curve: column(&|r| &r.learning_accuracy),
        final_curve: column(&|r| &r.final_accuracy),
        lesioned_curve: column(&|r| &r.lesioned_accuracy),
        mean_learning_accuracy: all_mean(&|r| &r.learning_accuracy),
        mean_final_accuracy: all_mean(&|r| &r.final_accuracy),
        mean_lesioned_accuracy: all_mean(&|r| &r.lesioned_accuracy),
        learning_by_faultiness: learning_by,
        final_by_faultiness: final_by,
        lesioned_by_faultiness: lesioned_by,
        difference_by_faultiness: difference,
        mse_regression: linear_regression(&x, &y).ok(),
    })
}
