use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

use super::{LwConfig, LwFrame, LwTheta, LwWorldEstimate, LwWorldProposal, LwWorldState};
use crate::error::{Error, Result};
use crate::rng::{self, stage};
use crate::smc;

/// Output of the sequential filter for one detector.
#[derive(Debug, Clone, PartialEq)]
pub struct LwRunResult {
    /// Filtering estimate of each world, made right after that world.
    pub worlds: Vec<LwWorldState>,
    /// Rate estimate after each world.
    pub theta_trajectory: Vec<LwTheta>,
    pub final_theta: LwTheta,
    /// ESS right after weighting, per world.
    pub ess: Vec<f64>,
    /// Fraction of accepted rate moves.
    pub acceptance: f64,
    /// The filter's distribution over each world, as `(world, probability)`
    /// over the prior's support (in the representation chosen by
    /// `world_estimate`).
    pub world_marginals: Vec<Vec<(LwWorldState, f64)>>,
}

/// Frame count and per-category detection counts for one world.
struct Summary {
    frames: f64,
    detections: Vec<f64>,
}

impl Summary {
    fn new(frames: &[LwFrame], num_categories: usize) -> Result<Self> {
        let mut detections = vec![0.0; num_categories];
        for f in frames {
            if f.detected.len() != num_categories {
                return Err(Error::data(format!(
                    "frame has {} categories, expected {num_categories}",
                    f.detected.len()
                )));
            }
            for (c, &d) in f.detected.iter().enumerate() {
                if d {
                    detections[c] += 1.0;
                }
            }
        }
        Ok(Summary {
            frames: frames.len() as f64,
            detections,
        })
    }

    /// Per-category log-likelihood of the frames when the category is
    /// absent and when it is present.
    fn terms(&self, theta: &LwTheta) -> Vec<[f64; 2]> {
        self.detections
            .iter()
            .enumerate()
            .map(|(c, &d)| {
                let u = self.frames - d;
                [
                    super::xlog(d, theta.hallucination[c]) + super::xlog(u, 1.0 - theta.hallucination[c]),
                    super::xlog(d, 1.0 - theta.miss[c]) + super::xlog(u, theta.miss[c]),
                ]
            })
            .collect()
    }

    fn log_likelihood(&self, terms: &[[f64; 2]], mask: u32) -> f64 {
        terms
            .iter()
            .enumerate()
            .map(|(c, t)| t[(mask >> c & 1) as usize])
            .sum()
    }
}

/// Per category: present and detected, present and missed, absent and
/// detected, absent and not detected.
type Counts = [f64; 4];

#[derive(Clone)]
struct LwParticle {
    theta: LwTheta,
    counts: Vec<Counts>,
    world: u32,
    log_weight: f64,
}

fn add_world(counts: &mut [Counts], s: &Summary, mask: u32) {
    for (c, k) in counts.iter_mut().enumerate() {
        let d = s.detections[c];
        if mask >> c & 1 == 1 {
            k[0] += d;
            k[1] += s.frames - d;
        } else {
            k[2] += d;
            k[3] += s.frames - d;
        }
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

fn sample_log_weights<R: Rng + ?Sized>(logp: &[f64], total: f64, rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, l) in logp.iter().enumerate() {
        acc += (l - total).exp();
        if u < acc {
            return i;
        }
    }
    logp.iter().rposition(|l| l.is_finite()).unwrap_or(logp.len() - 1)
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Log of the mass the proposal centred at `x` keeps inside (0, 1).
fn log_trunc_mass(x: f64, sd: f64) -> f64 {
    (std_normal_cdf((1.0 - x) / sd) - std_normal_cdf(-x / sd)).ln()
}

/// One Metropolis-Hastings step on a rate with Beta-shaped conditional
/// `Beta(a, b)`, using a truncated-normal random walk. `log_mass` is
/// `log_trunc_mass(x, sd)` and is updated along with `x`.
fn mh_rate<R: Rng + ?Sized>(x: &mut f64, log_mass: &mut f64, a: f64, b: f64, sd: f64, rng: &mut R) -> bool {
    let y = loop {
        let z: f64 = StandardNormal.sample(rng);
        let y = *x + sd * z;
        if y > 0.0 && y < 1.0 {
            break y;
        }
    };
    let y_mass = log_trunc_mass(y, sd);
    let log_ratio = (a - 1.0) * (y / *x).ln() + (b - 1.0) * ((1.0 - y) / (1.0 - *x)).ln() + *log_mass - y_mass;
    if log_ratio >= 0.0 || rng.gen::<f64>().ln() < log_ratio {
        *x = y;
        *log_mass = y_mass;
        true
    } else {
        false
    }
}

fn check_inputs<W: AsRef<[LwFrame]>>(worlds: &[W], cfg: &LwConfig) -> Result<usize> {
    let c = worlds
        .iter()
        .flat_map(|w| w.as_ref().first())
        .map(|f| f.detected.len())
        .next()
        .ok_or_else(|| Error::data("no frames to infer from"))?;
    cfg.validate(c)?;
    for (t, w) in worlds.iter().enumerate() {
        if w.as_ref().is_empty() {
            return Err(Error::data(format!("world {t} has no frames")));
        }
    }
    Ok(c)
}

/// Sequential inference of rates and worlds for one detector.
pub fn lw_run_filter<W: AsRef<[LwFrame]>>(worlds: &[W], cfg: &LwConfig) -> Result<LwRunResult> {
    let num_c = check_inputs(worlds, cfg)?;
    let support = cfg.world_prior.support(num_c);
    let masks: Vec<u32> = support.iter().map(|s| s.0).collect();
    let log_prior: Vec<f64> = support.iter().map(|s| s.1).collect();
    let m = cfg.num_particles;
    let (alpha, beta) = (cfg.prior_alpha, cfg.prior_beta);
    let prior = Beta::new(alpha, beta).map_err(|e| Error::config(e.to_string()))?;

    let mut r = rng::stream(cfg.seed, &[stage::PROPAGATE]);
    let mut particles: Vec<LwParticle> = (0..m)
        .map(|_| {
            let mut draw = || prior.sample(&mut r).clamp(1e-12, 1.0 - 1e-12);
            let hallucination = (0..num_c).map(|_| draw()).collect();
            let miss = (0..num_c).map(|_| draw()).collect();
            LwParticle {
                theta: LwTheta { hallucination, miss },
                counts: vec![[0.0; 4]; num_c],
                world: 0,
                log_weight: 0.0,
            }
        })
        .collect();

    let mut out_worlds = Vec::with_capacity(worlds.len());
    let mut trajectory = Vec::with_capacity(worlds.len());
    let mut ess_trace = Vec::with_capacity(worlds.len());
    let (mut proposed, mut accepted) = (0u64, 0u64);
    let mut scratch = vec![0.0; masks.len()];
    let mut marginals = Vec::with_capacity(worlds.len());

    for (t, frames) in worlds.iter().enumerate() {
        let s = Summary::new(frames.as_ref(), num_c)?;
        let t_tag = t as u64;

        let mut r = rng::stream(cfg.seed, &[stage::PROPAGATE, t_tag]);
        for p in particles.iter_mut() {
            let terms = s.terms(&p.theta);
            match cfg.world_proposal {
                LwWorldProposal::Posterior => {
                    for (k, &mask) in masks.iter().enumerate() {
                        scratch[k] = log_prior[k] + s.log_likelihood(&terms, mask);
                    }
                    let total = log_sum_exp(&scratch);
                    p.world = masks[sample_log_weights(&scratch, total, &mut r)];
                    p.log_weight += total;
                }
                LwWorldProposal::Prior => {
                    p.world = cfg.world_prior.sample(num_c, &mut r).mask();
                    p.log_weight += s.log_likelihood(&terms, p.world);
                }
            }
        }

        let logw: Vec<f64> = particles.iter().map(|p| p.log_weight).collect();
        let w = smc::normalize(&logw).ok_or(Error::DegenerateEnsemble)?;
        let ess = smc::effective_sample_size(&w);
        ess_trace.push(ess);
        if ess < cfg.ess_threshold * m as f64 {
            let mut rr = rng::stream(cfg.seed, &[stage::RESAMPLE, t_tag]);
            let idx = smc::systematic_resample(&w, &mut rr);
            particles = idx.iter().map(|&i| particles[i].clone()).collect();
            for p in &mut particles {
                p.log_weight = 0.0;
            }
        } else {
            let max = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            for p in &mut particles {
                p.log_weight -= max;
            }
        }

        let mut r = rng::stream(cfg.seed, &[stage::REJUVENATE, t_tag]);
        let mut order: Vec<usize> = (0..2 * num_c).collect();
        for p in particles.iter_mut() {
            let mut log_mass: Vec<f64> = p
                .theta
                .hallucination
                .iter()
                .chain(&p.theta.miss)
                .map(|&x| log_trunc_mass(x, cfg.proposal_sd))
                .collect();
            let mut counts = p.counts.clone();
            add_world(&mut counts, &s, p.world);
            for _ in 0..cfg.rejuvenation_sweeps {
                order.shuffle(&mut r);
                for &e in &order {
                    let c = e % num_c;
                    let k = counts[c];
                    let (x, a, b) = if e < num_c {
                        (&mut p.theta.hallucination[c], alpha + k[2], beta + k[3])
                    } else {
                        (&mut p.theta.miss[c], alpha + k[1], beta + k[0])
                    };
                    let ok = mh_rate(x, &mut log_mass[e], a, b, cfg.proposal_sd, &mut r);
                    proposed += 1;
                    accepted += ok as u64;
                }
                if cfg.world_proposal == LwWorldProposal::Posterior {
                    let terms = s.terms(&p.theta);
                    for (k, &mask) in masks.iter().enumerate() {
                        scratch[k] = log_prior[k] + s.log_likelihood(&terms, mask);
                    }
                    let total = log_sum_exp(&scratch);
                    let next = masks[sample_log_weights(&scratch, total, &mut r)];
                    if next != p.world {
                        p.world = next;
                        counts = p.counts.clone();
                        add_world(&mut counts, &s, p.world);
                    }
                }
            }
            let world = p.world;
            add_world(&mut p.counts, &s, world);
        }

        let logw: Vec<f64> = particles.iter().map(|p| p.log_weight).collect();
        let w = smc::normalize(&logw).ok_or(Error::DegenerateEnsemble)?;
        let mut theta_hat = LwTheta::uniform(num_c, 0.0, 0.0);
        let mut world_mass = vec![0.0; masks.len()];
        for (p, wi) in particles.iter().zip(&w) {
            for c in 0..num_c {
                theta_hat.hallucination[c] += wi * p.theta.hallucination[c];
                theta_hat.miss[c] += wi * p.theta.miss[c];
            }
            match cfg.world_estimate {
                LwWorldEstimate::Marginal => {
                    let terms = s.terms(&p.theta);
                    for (k, &mask) in masks.iter().enumerate() {
                        scratch[k] = log_prior[k] + s.log_likelihood(&terms, mask);
                    }
                    let total = log_sum_exp(&scratch);
                    for k in 0..masks.len() {
                        world_mass[k] += wi * (scratch[k] - total).exp();
                    }
                }
                LwWorldEstimate::Vote => {
                    if let Ok(k) = masks.binary_search(&p.world) {
                        world_mass[k] += wi;
                    }
                }
            }
        }
        for v in theta_hat.hallucination.iter_mut().chain(theta_hat.miss.iter_mut()) {
            *v = v.clamp(0.0, 1.0);
        }
        let best = argmax(&world_mass);
        out_worlds.push(LwWorldState::from_mask(masks[best], num_c));
        marginals.push(
            masks
                .iter()
                .zip(&world_mass)
                .map(|(&m, &p)| (LwWorldState::from_mask(m, num_c), p))
                .collect(),
        );
        trajectory.push(theta_hat);
    }

    let final_theta = trajectory.last().cloned().expect("at least one world");
    Ok(LwRunResult {
        worlds: out_worlds,
        theta_trajectory: trajectory,
        final_theta,
        ess: ess_trace,
        acceptance: if proposed == 0 { 0.0 } else { accepted as f64 / proposed as f64 },
        world_marginals: marginals,
    })
}

/// First index of the largest value.
fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Re-infer every world with the rates held at `theta`.
///
/// With fixed rates the worlds are conditionally independent and each one's
/// posterior has at most `2^|C|` states, so the most probable world is found
/// by enumeration rather than sampling.
pub fn lw_reinfer<W: AsRef<[LwFrame]>>(worlds: &[W], theta: &LwTheta, cfg: &LwConfig) -> Result<Vec<LwWorldState>> {
    if worlds.is_empty() {
        return Ok(Vec::new());
    }
    let num_c = check_inputs(worlds, cfg)?;
    theta.validate()?;
    if theta.num_categories() != num_c {
        return Err(Error::config("theta and frames disagree on the number of categories"));
    }
    let support = cfg.world_prior.support(num_c);
    worlds
        .iter()
        .map(|frames| {
            let s = Summary::new(frames.as_ref(), num_c)?;
            let terms = s.terms(theta);
            let scores: Vec<f64> = support
                .iter()
                .map(|&(mask, lp)| lp + s.log_likelihood(&terms, mask))
                .collect();
            Ok(LwWorldState::from_mask(support[argmax(&scores)].0, num_c))
        })
        .collect()
}

/// Exact posterior marginals of each world under the model, with the rates
/// integrated out analytically. Enumerates every joint assignment, so it is
/// only usable on tiny instances (at most 10^6 joint worlds).
pub fn lw_exact_world_posterior<W: AsRef<[LwFrame]>>(
    worlds: &[W],
    cfg: &LwConfig,
) -> Result<Vec<Vec<(LwWorldState, f64)>>> {
    let num_c = check_inputs(worlds, cfg)?;
    let support = cfg.world_prior.support(num_c);
    let joint = (support.len() as f64).powi(worlds.len() as i32);
    if joint > 1e6 {
        return Err(Error::config("instance too large for exact enumeration"));
    }
    let summaries: Vec<Summary> = worlds
        .iter()
        .map(|f| Summary::new(f.as_ref(), num_c))
        .collect::<Result<_>>()?;
    let (a, b) = (cfg.prior_alpha, cfg.prior_beta);
    let ln_b = |x: f64, y: f64| ln_gamma(x) + ln_gamma(y) - ln_gamma(x + y);
    let t_len = worlds.len();
    let mut choice = vec![0usize; t_len];
    let mut log_joint = Vec::new();
    let mut assignments = Vec::new();
    loop {
        let mut counts = vec![[0.0; 4]; num_c];
        let mut lp = 0.0;
        for (t, &k) in choice.iter().enumerate() {
            add_world(&mut counts, &summaries[t], support[k].0);
            lp += support[k].1;
        }
        for k in &counts {
            lp += ln_b(a + k[2], b + k[3]) - ln_b(a, b);
            lp += ln_b(a + k[1], b + k[0]) - ln_b(a, b);
        }
        log_joint.push(lp);
        assignments.push(choice.clone());
        let mut i = 0;
        loop {
            if i == t_len {
                break;
            }
            choice[i] += 1;
            if choice[i] < support.len() {
                break;
            }
            choice[i] = 0;
            i += 1;
        }
        if i == t_len {
            break;
        }
    }
    let total = log_sum_exp(&log_joint);
    let mut marginals = vec![vec![0.0; support.len()]; t_len];
    for (lj, asg) in log_joint.iter().zip(&assignments) {
        let p = (lj - total).exp();
        for (t, &k) in asg.iter().enumerate() {
            marginals[t][k] += p;
        }
    }
    Ok(marginals
        .into_iter()
        .map(|m| {
            m.into_iter()
                .enumerate()
                .map(|(k, p)| (LwWorldState::from_mask(support[k].0, num_c), p))
                .collect()
        })
        .collect())
}
