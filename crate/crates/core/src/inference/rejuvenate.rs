//! Metropolis-Hastings rejuvenation of a single particle.
//!
//! One sweep is three moves:
//!
//! 1. add or remove an object (reversible, with data-driven add proposals
//!    and removal weights `1 / (1 + matches)`),
//! 2. move one object, either a small Gaussian step or a redraw near a
//!    back-projected detection,
//! 3. redraw each error rate from the current (and previous) scene's beliefs.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::proposals::{add_probability, category_weights, log_sum_exp2, SceneIndex};
use super::{FilterConfig, MoveStats};
use crate::generative::{world_log_prior, MatchStats, SceneScorer};
use crate::model::{MetaBeliefs, Object3D, Theta, WorldState};

/// One joint hypothesis inside the filter.
#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub world: WorldState,
    pub theta_current: Theta,
    /// Theta for the previous scene; `None` on the first scene.
    pub theta_previous: Option<Theta>,
    /// Beliefs governing the current scene.
    pub beliefs: MetaBeliefs,
    /// Beliefs that governed the previous scene.
    pub previous_beliefs: Option<MetaBeliefs>,
    /// Position of this particle's previous world in the filter's record of
    /// the previous scene.
    pub previous_world_index: Option<usize>,
    pub log_weight: f64,
}

impl Particle {
    pub fn new(world: WorldState, theta: Theta, beliefs: MetaBeliefs) -> Self {
        Particle {
            world,
            theta_current: theta,
            theta_previous: None,
            beliefs,
            previous_beliefs: None,
            previous_world_index: None,
            log_weight: 0.0,
        }
    }
}

/// Data a chain needs besides the particle itself.
pub struct ChainContext<'a, 'b> {
    pub scorer: &'b SceneScorer<'a>,
    pub index: &'b SceneIndex,
    pub cfg: &'b FilterConfig,
    /// Statistics of the particle's previous world against the previous
    /// scene, used to score `theta_previous`.
    pub previous_stats: Option<&'b MatchStats>,
    /// When false theta is held fixed.
    pub move_theta: bool,
}

struct ChainState {
    world: WorldState,
    stats: MatchStats,
    log_prior: f64,
}

impl ChainState {
    fn new(world: WorldState, ctx: &ChainContext) -> Self {
        let stats = ctx.scorer.stats(&world);
        let log_prior = world_log_prior(&world, &ctx.cfg.scene_prior, ctx.scorer.num_categories());
        ChainState { world, stats, log_prior }
    }
}

fn removal_log_prob(stats: &MatchStats, idx: usize) -> f64 {
    let total: f64 = stats.object_matches.iter().map(|&m| 1.0 / (1.0 + m as f64)).sum();
    (1.0 / (1.0 + stats.object_matches[idx] as f64) / total).ln()
}

fn sample_removal<R: Rng + ?Sized>(stats: &MatchStats, rng: &mut R) -> usize {
    let w: Vec<f64> = stats.object_matches.iter().map(|&m| 1.0 / (1.0 + m as f64)).collect();
    let total: f64 = w.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (i, wi) in w.iter().enumerate() {
        if u < *wi {
            return i;
        }
        u -= wi;
    }
    w.len() - 1
}

fn accept<R: Rng + ?Sized>(log_ratio: f64, rng: &mut R) -> bool {
    log_ratio >= 0.0 || rng.gen::<f64>().ln() < log_ratio
}

/// Log density of the add proposal for an object of category `c` at `x`.
fn log_add_density(index: &SceneIndex, theta: &Theta, c: usize, x: &crate::geometry::Vec3) -> f64 {
    let w = category_weights(&index.counts, theta);
    let total: f64 = w.iter().sum();
    if w[c] <= 0.0 {
        return f64::NEG_INFINITY;
    }
    (w[c] / total).ln() + index.log_density_location(c, x)
}

fn world_edit<R: Rng + ?Sized>(
    state: &mut ChainState,
    theta: &Theta,
    ctx: &ChainContext,
    stats: &mut MoveStats,
    rng: &mut R,
) {
    let index = ctx.index;
    let padd = add_probability(theta, index.total_detections, ctx.cfg.add_rule);
    let n_cat = ctx.scorer.num_categories();
    let current = state.stats.log_likelihood(theta) + state.log_prior;
    if rng.gen::<f64>() < padd {
        let w = category_weights(&index.counts, theta);
        let total: f64 = w.iter().sum();
        if !(total > 0.0) {
            return;
        }
        let mut u = rng.gen::<f64>() * total;
        let mut c = w.len() - 1;
        for (i, wi) in w.iter().enumerate() {
            if u < *wi {
                c = i;
                break;
            }
            u -= wi;
        }
        let x = index.sample_location(c, rng);
        let mut world = state.world.clone();
        world.objects.push(Object3D::new(x, c));
        let new_stats = ctx.scorer.stats(&world);
        let new_prior = world_log_prior(&world, &ctx.cfg.scene_prior, n_cat);
        let proposed = new_stats.log_likelihood(theta) + new_prior;
        let forward = padd.ln() + log_add_density(index, theta, c, &x);
        let reverse = (1.0 - padd).ln() + removal_log_prob(&new_stats, world.objects.len() - 1);
        stats.add_proposed += 1;
        if proposed.is_finite() && accept(proposed - current + reverse - forward, rng) {
            stats.add_accepted += 1;
            *state = ChainState { world, stats: new_stats, log_prior: new_prior };
        }
    } else if !state.world.is_empty() {
        let idx = sample_removal(&state.stats, rng);
        let removed = state.world.objects[idx];
        let forward = (1.0 - padd).ln() + removal_log_prob(&state.stats, idx);
        let mut world = state.world.clone();
        world.objects.remove(idx);
        let new_stats = ctx.scorer.stats(&world);
        let new_prior = world_log_prior(&world, &ctx.cfg.scene_prior, n_cat);
        let proposed = new_stats.log_likelihood(theta) + new_prior;
        let reverse = padd.ln() + log_add_density(index, theta, removed.category, &removed.position);
        stats.remove_proposed += 1;
        if proposed.is_finite() && accept(proposed - current + reverse - forward, rng) {
            stats.remove_accepted += 1;
            *state = ChainState { world, stats: new_stats, log_prior: new_prior };
        }
    }
}

fn location_move<R: Rng + ?Sized>(
    state: &mut ChainState,
    theta: &Theta,
    ctx: &ChainContext,
    stats: &mut MoveStats,
    rng: &mut R,
) {
    if state.world.is_empty() {
        return;
    }
    let index = ctx.index;
    let sigma = ctx.cfg.location_sigma;
    let idx = rng.gen_range(0..state.world.len());
    let obj = state.world.objects[idx];
    let step = Normal::new(0.0, sigma).expect("positive sigma");
    let x = obj.position;
    let x_new = if rng.gen::<f64>() < 0.5 {
        x + crate::geometry::Vec3::new(step.sample(rng), step.sample(rng), step.sample(rng))
    } else {
        index.sample_ray(obj.category, rng)
    };
    // mixture proposal: 0.5 Gaussian step + 0.5 ray redraw
    let log_gauss = |a: &crate::geometry::Vec3, b: &crate::geometry::Vec3| {
        -1.5 * (2.0 * std::f64::consts::PI * sigma * sigma).ln() - (a - b).norm_squared() / (2.0 * sigma * sigma)
    };
    let forward = log_sum_exp2(log_gauss(&x_new, &x), index.log_density_ray(obj.category, &x_new));
    let reverse = log_sum_exp2(log_gauss(&x, &x_new), index.log_density_ray(obj.category, &x));
    let mut world = state.world.clone();
    world.objects[idx].position = x_new;
    let new_prior = world_log_prior(&world, &ctx.cfg.scene_prior, ctx.scorer.num_categories());
    stats.move_proposed += 1;
    if !new_prior.is_finite() {
        return;
    }
    let new_stats = ctx.scorer.stats(&world);
    let current = state.stats.log_likelihood(theta) + state.log_prior;
    let proposed = new_stats.log_likelihood(theta) + new_prior;
    if proposed.is_finite() && accept(proposed - current + reverse - forward, rng) {
        stats.move_accepted += 1;
        *state = ChainState { world, stats: new_stats, log_prior: new_prior };
    }
}

/// Independence proposals from the beliefs, one rate at a time. The target
/// factorizes over rates, so each redraw is accepted on its own likelihood
/// ratio.
fn theta_move<R: Rng + ?Sized>(
    theta: &mut Theta,
    beliefs: &MetaBeliefs,
    stats: &MatchStats,
    counters: &mut MoveStats,
    rng: &mut R,
) {
    let frames = stats.num_frames as f64;
    for c in 0..theta.num_categories() {
        let (lambda_new, p_new) = beliefs.sample_category(c, rng);
        let h = stats.hallucinations[c] as f64;
        let ll_l = |l: f64| if h == 0.0 { -frames * l } else { h * l.ln() - frames * l };
        counters.theta_proposed += 1;
        if accept(ll_l(lambda_new) - ll_l(theta.hallucination[c]), rng) {
            theta.hallucination[c] = lambda_new;
            counters.theta_accepted += 1;
        }
        let m = stats.matches[c] as f64;
        let e = stats.events[c] as f64;
        let ll_p = |p: f64| {
            (if m == 0.0 { 0.0 } else { m * p.ln() }) + if e == 0.0 { 0.0 } else { e * (1.0 - p).ln() }
        };
        counters.theta_proposed += 1;
        if accept(ll_p(p_new) - ll_p(theta.detection[c]), rng) {
            theta.detection[c] = p_new;
            counters.theta_accepted += 1;
        }
    }
}

/// Run `cfg.rejuvenation_sweeps` sweeps on `particle` and return the final
/// state of the chain. The log weight is left unchanged.
pub fn rejuvenate<R: Rng + ?Sized>(
    particle: &Particle,
    ctx: &ChainContext,
    stats: &mut MoveStats,
    rng: &mut R,
) -> Particle {
    let mut out = particle.clone();
    if ctx.cfg.rejuvenation_sweeps == 0 {
        return out;
    }
    let mut state = ChainState::new(particle.world.clone(), ctx);
    for _ in 0..ctx.cfg.rejuvenation_sweeps {
        world_edit(&mut state, &out.theta_current, ctx, stats, rng);
        location_move(&mut state, &out.theta_current, ctx, stats, rng);
        if ctx.move_theta {
            theta_move(&mut out.theta_current, &out.beliefs, &state.stats, stats, rng);
            if let (Some(prev), Some(prev_beliefs), Some(prev_stats)) =
                (out.theta_previous.as_mut(), out.previous_beliefs.as_ref(), ctx.previous_stats)
            {
                theta_move(prev, prev_beliefs, prev_stats, stats, rng);
            }
        }
    }
    out.world = state.world;
    out
}
