use std::collections::HashMap;

use rayon::prelude::*;

use super::proposals::SceneIndex;
use super::rejuvenate::{rejuvenate, ChainContext, Particle};
use super::{FilterConfig, InferenceResult, MoveStats, PointEstimate, SceneSummary};
use crate::error::{Error, Result};
use crate::generative::{world_log_prior, NoiseModel, SceneScorer};
use crate::geometry::CameraIntrinsics;
use crate::model::{MetaBeliefs, SceneData, Theta, WorldState};
use crate::rng::{self, stage};
use crate::smc;

/// Weighted particle average of `theta_current`.
pub fn estimate_v(particles: &[Particle]) -> Result<Theta> {
    let logw: Vec<f64> = particles.iter().map(|p| p.log_weight).collect();
    let w = smc::normalize(&logw).ok_or(Error::DegenerateEnsemble)?;
    let n = particles[0].theta_current.num_categories();
    let mut hallucination = vec![0.0; n];
    let mut detection = vec![0.0; n];
    for (p, wi) in particles.iter().zip(&w) {
        if *wi == 0.0 {
            continue;
        }
        for c in 0..n {
            hallucination[c] += wi * p.theta_current.hallucination[c];
            detection[c] += wi * p.theta_current.detection[c];
        }
    }
    for d in &mut detection {
        *d = d.min(1.0 - 1e-12);
    }
    Ok(Theta {
        hallucination,
        detection,
    })
}

fn point_estimate(
    particles: &[Particle],
    scorer: &SceneScorer,
    cfg: &FilterConfig,
    num_categories: usize,
) -> WorldState {
    let joint = |p: &Particle| {
        scorer.log_likelihood(&p.world, &p.theta_current)
            + world_log_prior(&p.world, &cfg.scene_prior, num_categories)
    };
    let best_of = |idx: &mut dyn Iterator<Item = usize>| -> usize {
        let mut best: Option<(usize, f64, f64)> = None;
        for i in idx {
            let lw = particles[i].log_weight;
            let better = match best {
                None => true,
                Some((_, bw, bj)) => {
                    if lw > bw {
                        true
                    } else if lw == bw {
                        joint(&particles[i]) > bj
                    } else {
                        false
                    }
                }
            };
            if better {
                best = Some((i, lw, joint(&particles[i])));
            }
        }
        best.map(|b| b.0).unwrap_or(0)
    };
    match cfg.point_estimate {
        PointEstimate::HighestWeight => particles[best_of(&mut (0..particles.len()))].world.clone(),
        PointEstimate::CategoryVote => {
            let logw: Vec<f64> = particles.iter().map(|p| p.log_weight).collect();
            let w = smc::normalize(&logw).unwrap_or_else(|| vec![1.0; particles.len()]);
            let mut votes: HashMap<Vec<usize>, f64> = HashMap::new();
            for (p, wi) in particles.iter().zip(&w) {
                *votes.entry(p.world.category_multiset()).or_default() += wi;
            }
            let mut ranked: Vec<_> = votes.into_iter().collect();
            ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            let winner = &ranked[0].0;
            let idx = best_of(&mut (0..particles.len()).filter(|&i| &particles[i].world.category_multiset() == winner));
            particles[idx].world.clone()
        }
    }
}

/// Per-scene bookkeeping for the previous scene.
struct Previous<'a> {
    scorer: SceneScorer<'a>,
    worlds: Vec<WorldState>,
}

/// Sequential inference over `scenes`, one scene at a time.
pub fn run_filter(
    scenes: &[SceneData],
    num_categories: usize,
    cfg: &FilterConfig,
    intr: &CameraIntrinsics,
    noise: &NoiseModel,
) -> Result<InferenceResult> {
    run_filter_with_observer(scenes, num_categories, cfg, intr, noise, |_, _| {})
}

/// [`run_filter`] that reports each finished scene to `observer`.
pub fn run_filter_with_observer<F: FnMut(usize, &SceneSummary)>(
    scenes: &[SceneData],
    num_categories: usize,
    cfg: &FilterConfig,
    intr: &CameraIntrinsics,
    noise: &NoiseModel,
    mut observer: F,
) -> Result<InferenceResult> {
    cfg.validate()?;
    intr.validate()?;
    noise.validate()?;
    if scenes.is_empty() {
        return Err(Error::data("need at least one scene"));
    }
    for (i, s) in scenes.iter().enumerate() {
        s.validate(num_categories).map_err(|e| Error::data(format!("scene {i}: {e}")))?;
    }
    let prior = MetaBeliefs::prior(num_categories)?;
    let m = cfg.num_particles;
    let mut particles: Vec<Particle> = (0..m)
        .map(|_| Particle::new(WorldState::empty(), prior.expected_theta(), prior.clone()))
        .collect();
    let mut previous: Option<Previous> = None;
    let mut summaries = Vec::with_capacity(scenes.len());

    for (t, scene) in scenes.iter().enumerate() {
        let scorer = SceneScorer::new(scene, intr, noise, num_categories);
        let index = SceneIndex::new(scene, scorer.cameras(), num_categories, &cfg.scene_prior.bounds, cfg.line_variance);
        let t_tag = t as u64;

        // propagate and weight
        particles.par_iter_mut().enumerate().for_each(|(i, p)| {
            let mut r = rng::stream(cfg.seed, &[stage::PROPAGATE, t_tag, i as u64]);
            p.world = cfg.scene_prior.sample(num_categories, &mut r);
            p.theta_current = p.beliefs.sample_theta(&mut r);
            p.log_weight += scorer.log_likelihood(&p.world, &p.theta_current);
        });

        let (ess, resampled, log_evidence) = reweight(&mut particles, cfg, t_tag)?;

        let prev_stats: Vec<Option<crate::generative::MatchStats>> = match &previous {
            Some(prev) => particles
                .par_iter()
                .map(|p| p.previous_world_index.map(|k| prev.scorer.stats(&prev.worlds[k])))
                .collect(),
            None => vec![None; m],
        };

        let results: Vec<(Particle, MoveStats)> = particles
            .par_iter()
            .zip(prev_stats.par_iter())
            .enumerate()
            .map(|(i, (p, ps))| {
                let mut r = rng::stream(cfg.seed, &[stage::REJUVENATE, t_tag, i as u64]);
                let ctx = ChainContext {
                    scorer: &scorer,
                    index: &index,
                    cfg,
                    previous_stats: ps.as_ref(),
                    move_theta: true,
                };
                let mut moves = MoveStats::default();
                let out = rejuvenate(p, &ctx, &mut moves, &mut r);
                (out, moves)
            })
            .collect();
        let mut moves = MoveStats::default();
        particles = results
            .into_iter()
            .map(|(p, s)| {
                moves.merge(&s);
                p
            })
            .collect();

        let theta_hat = estimate_v(&particles)?;
        let world = point_estimate(&particles, &scorer, cfg, num_categories);

        // belief update from each particle's own world
        let updated: Vec<Result<MetaBeliefs>> = particles
            .par_iter()
            .map(|p| {
                let diffs: Vec<_> = scene
                    .frames
                    .iter()
                    .zip(scorer.cameras())
                    .map(|(f, cam)| {
                        crate::model::FrameMatch::compute(&p.world, cam, &f.detections, noise.radius)
                            .to_diff(&p.world, &f.detections, num_categories)
                    })
                    .collect();
                p.beliefs.update(&diffs, scene.frames.len())
            })
            .collect();
        let mut worlds = Vec::with_capacity(m);
        for (k, (p, b)) in particles.iter_mut().zip(updated).enumerate() {
            let b = b?;
            p.previous_beliefs = Some(std::mem::replace(&mut p.beliefs, b));
            p.theta_previous = Some(p.theta_current.clone());
            worlds.push(p.world.clone());
            p.previous_world_index = Some(k);
        }
        previous = Some(Previous { scorer, worlds });

        let summary = SceneSummary {
            world,
            theta_hat,
            ess,
            resampled,
            log_evidence,
            moves,
        };
        observer(t, &summary);
        summaries.push(summary);
    }

    let final_theta = summaries.last().map(|s| s.theta_hat.clone()).expect("at least one scene");
    Ok(InferenceResult {
        scenes: summaries,
        final_theta,
        particles,
    })
}

/// Normalize, compute ESS and resample when it is too small. Returns
/// `(ess, resampled, log incremental evidence)`.
fn reweight(particles: &mut Vec<Particle>, cfg: &FilterConfig, t_tag: u64) -> Result<(f64, bool, f64)> {
    let m = particles.len();
    let logw: Vec<f64> = particles.iter().map(|p| p.log_weight).collect();
    let w = smc::normalize(&logw).ok_or(Error::DegenerateEnsemble)?;
    let ess = smc::effective_sample_size(&w);
    let log_mean = smc::log_mean_exp(&logw);
    let resampled = ess < cfg.ess_threshold * m as f64;
    if resampled {
        let mut r = rng::stream(cfg.seed, &[stage::RESAMPLE, t_tag]);
        let idx = smc::systematic_resample(&w, &mut r);
        let mut next: Vec<Particle> = idx.iter().map(|&i| particles[i].clone()).collect();
        for p in &mut next {
            p.log_weight = 0.0;
        }
        *particles = next;
    } else {
        // keep weights on a bounded scale
        let max = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for p in particles.iter_mut() {
            p.log_weight -= max;
        }
    }
    Ok((ess, resampled, log_mean))
}

/// Re-estimate every scene's world with theta held at `theta_hat`: no theta
/// moves and no belief updates. Scenes are independent.
pub fn reinfer(
    scenes: &[SceneData],
    theta_hat: &Theta,
    cfg: &FilterConfig,
    intr: &CameraIntrinsics,
    noise: &NoiseModel,
) -> Result<Vec<WorldState>> {
    cfg.validate()?;
    theta_hat.validate()?;
    let n = theta_hat.num_categories();
    for (i, s) in scenes.iter().enumerate() {
        s.validate(n).map_err(|e| Error::data(format!("scene {i}: {e}")))?;
    }
    let beliefs = MetaBeliefs::prior(n)?;
    scenes
        .par_iter()
        .enumerate()
        .map(|(t, scene)| {
            let scorer = SceneScorer::new(scene, intr, noise, n);
            let index = SceneIndex::new(scene, scorer.cameras(), n, &cfg.scene_prior.bounds, cfg.line_variance);
            let t_tag = t as u64;
            let mut particles: Vec<Particle> = (0..cfg.num_particles)
                .map(|i| {
                    let mut r = rng::stream(cfg.seed, &[stage::REINFER, stage::PROPAGATE, t_tag, i as u64]);
                    let world = cfg.scene_prior.sample(n, &mut r);
                    let mut p = Particle::new(world, theta_hat.clone(), beliefs.clone());
                    p.log_weight = scorer.log_likelihood(&p.world, theta_hat);
                    p
                })
                .collect();
            reweight(&mut particles, cfg, stage::REINFER << 32 | t_tag)?;
            let ctx = ChainContext {
                scorer: &scorer,
                index: &index,
                cfg,
                previous_stats: None,
                move_theta: false,
            };
            let particles: Vec<Particle> = particles
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    let mut r = rng::stream(cfg.seed, &[stage::REINFER, stage::REJUVENATE, t_tag, i as u64]);
                    rejuvenate(p, &ctx, &mut MoveStats::default(), &mut r)
                })
                .collect();
            Ok(point_estimate(&particles, &scorer, cfg, n))
        })
        .collect()
}
