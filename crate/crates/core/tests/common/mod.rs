//! Reference computations written independently of the library, used as
//! oracles by the integration and acceptance tests.

#![allow(dead_code)]

pub mod pipeline;

/// `P(Poisson(lambda) <= k)` by summing terms one at a time.
pub fn poisson_cdf(lambda: f64, k: usize) -> f64 {
    let mut term = (-lambda).exp();
    let mut sum = term;
    for i in 1..=k {
        term *= lambda / i as f64;
        sum += term;
    }
    sum.min(1.0)
}

/// Add probability: half the chance of seeing more detections than the
/// hallucination rates alone would explain.
pub fn p_add_reference(lambda_total: f64, k: usize) -> f64 {
    0.5 * (1.0 - poisson_cdf(lambda_total, k))
}

fn binomial(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `P(X > x)` for `X ~ Beta(a, b)` with integer shapes, via the binomial
/// identity `P(X > x) = P(Bin(a + b - 1, x) < a)`.
pub fn beta_upper_tail(a: u64, b: u64, x: f64) -> f64 {
    let n = a + b - 1;
    (0..a).map(|j| binomial(n, j) * x.powi(j as i32) * (1.0 - x).powi((n - j) as i32)).sum()
}

/// Probability of one presence frame, multiplied out bit by bit.
pub fn lw_frame_probability(detected: &[bool], present: &[bool], hallucination: &[f64], miss: &[f64]) -> f64 {
    let mut p = 1.0;
    for c in 0..detected.len() {
        p *= match (present[c], detected[c]) {
            (true, true) => 1.0 - miss[c],
            (true, false) => miss[c],
            (false, true) => hallucination[c],
            (false, false) => 1.0 - hallucination[c],
        };
    }
    p
}

/// Prior probability of a presence vector: a Poisson(rate) count truncated
/// to `[lo, min(hi, n)]`, then a uniformly chosen set of that size.
pub fn lw_world_prior(present: &[bool], rate: f64, lo: usize, hi: usize) -> f64 {
    let n = present.len();
    let hi = hi.min(n);
    let k = present.iter().filter(|b| **b).count();
    if k < lo || k > hi {
        return 0.0;
    }
    let pois = |j: usize| (-rate).exp() * rate.powi(j as i32) / (1..=j).product::<usize>() as f64;
    let z: f64 = (lo..=hi).map(pois).sum();
    pois(k) / z / binomial(n as u64, k as u64)
}

/// `int_0^1 Beta(x; a, b) x^s (1 - x)^f dx` by composite Simpson.
pub fn beta_moment_quadrature(a: f64, b: f64, s: f64, f: f64) -> f64 {
    let n = 4000;
    let h = 1.0 / n as f64;
    let norm = {
        let g = |x: f64| x.powf(a - 1.0) * (1.0 - x).powf(b - 1.0);
        simpson(g, n, h)
    };
    let g = |x: f64| x.powf(a - 1.0 + s) * (1.0 - x).powf(b - 1.0 + f);
    simpson(g, n, h) / norm
}

fn simpson(g: impl Fn(f64) -> f64, n: usize, h: f64) -> f64 {
    let mut acc = g(0.0) + g(1.0);
    for i in 1..n {
        let x = i as f64 * h;
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * g(x);
    }
    acc * h / 3.0
}

/// Posterior marginal of every world given all frames, with the per-category
/// rates integrated against a `Beta(a, b)` prior by quadrature. `worlds[t]`
/// holds the detection vectors of world `t`.
pub fn lw_posterior_by_quadrature(
    worlds: &[Vec<Vec<bool>>],
    num_categories: usize,
    rate: f64,
    lo: usize,
    hi: usize,
    a: f64,
    b: f64,
) -> Vec<Vec<(u32, f64)>> {
    let masks: Vec<u32> = (0..1u32 << num_categories)
        .filter(|m| {
            let bits: Vec<bool> = (0..num_categories).map(|c| m >> c & 1 == 1).collect();
            lw_world_prior(&bits, rate, lo, hi) > 0.0
        })
        .collect();
    let t_len = worlds.len();
    let mut marg = vec![vec![0.0; masks.len()]; t_len];
    let mut total = 0.0;
    let mut choice = vec![0usize; t_len];
    loop {
        let mut weight = 1.0;
        // counts per category: present-detected, present-missed, absent-detected, absent-clear
        let mut counts = vec![[0.0f64; 4]; num_categories];
        for (t, &k) in choice.iter().enumerate() {
            let m = masks[k];
            let bits: Vec<bool> = (0..num_categories).map(|c| m >> c & 1 == 1).collect();
            weight *= lw_world_prior(&bits, rate, lo, hi);
            for frame in &worlds[t] {
                for c in 0..num_categories {
                    let slot = match (bits[c], frame[c]) {
                        (true, true) => 0,
                        (true, false) => 1,
                        (false, true) => 2,
                        (false, false) => 3,
                    };
                    counts[c][slot] += 1.0;
                }
            }
        }
        for k in &counts {
            weight *= beta_moment_quadrature(a, b, k[2], k[3]);
            weight *= beta_moment_quadrature(a, b, k[1], k[0]);
        }
        total += weight;
        for (t, &k) in choice.iter().enumerate() {
            marg[t][k] += weight;
        }
        let mut i = 0;
        while i < t_len {
            choice[i] += 1;
            if choice[i] < masks.len() {
                break;
            }
            choice[i] = 0;
            i += 1;
        }
        if i == t_len {
            break;
        }
    }
    marg.into_iter()
        .map(|m| masks.iter().zip(m).map(|(&mask, w)| (mask, w / total)).collect())
        .collect()
}

/// Minimum-cost assignment by trying every injection of the smaller side.
pub fn brute_force_assignment_cost(cost: &[Vec<f64>]) -> f64 {
    let rows = cost.len();
    let cols = cost.first().map_or(0, |r| r.len());
    if rows == 0 || cols == 0 {
        return 0.0;
    }
    fn go(cost: &[Vec<f64>], r: usize, used: &mut Vec<bool>, transpose: bool) -> f64 {
        let (rows, cols) = if transpose { (cost[0].len(), cost.len()) } else { (cost.len(), cost[0].len()) };
        if r == rows {
            return 0.0;
        }
        let mut best = f64::INFINITY;
        for c in 0..cols {
            if !used[c] {
                used[c] = true;
                let v = if transpose { cost[c][r] } else { cost[r][c] };
                best = best.min(v + go(cost, r + 1, used, transpose));
                used[c] = false;
            }
        }
        best
    }
    let transpose = rows > cols;
    let n_cols = if transpose { rows } else { cols };
    go(cost, 0, &mut vec![false; n_cols], transpose)
}

/// Total variation distance between two distributions on the same support.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}
