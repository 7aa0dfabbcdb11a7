mod common;

use metacog::eval::{ground_truth_theta, jaccard};
use metacog::generative::{scene_log_likelihood, simulate_detections, NoiseModel, SceneScorer};
use metacog::geometry::{
    backproject, sample_trajectory, CameraIntrinsics, CameraPose, PinholeCamera, RoomBounds, TrajectoryParams, Vec3,
};
use metacog::inference::{
    category_weights, estimate_v, p_add, propose_category, propose_location, rejuvenate, reinfer, run_filter,
    ChainContext, FilterConfig, MoveStats, Particle, SceneIndex, SegmentRay,
};
use metacog::rng::{self, stage};
use metacog::simulator::{synthesize_3d_scene_data, Synth3dParams};
use metacog::smc;
use metacog::{MetaBeliefs, Object3D, SceneData, Theta, WorldState};
use proptest::prelude::*;
use rand::Rng;

fn theta_with_total(total: f64) -> Theta {
    Theta::uniform(4, total / 4.0, 0.5).unwrap()
}

#[test]
fn p_add_examples() {
    assert_eq!(p_add(&theta_with_total(0.0), 0), 0.0);
    assert_eq!(p_add(&theta_with_total(0.0), 7), 0.0);
    assert!((p_add(&theta_with_total(1.0), 0) - 0.5 * (1.0 - (-1f64).exp())).abs() < 1e-15);
    assert!((p_add(&theta_with_total(1.0), 0) - 0.3161).abs() < 1e-4);
    let cdf = (-2f64).exp() * (1.0 + 2.0 + 2.0 + 4.0 / 3.0);
    assert!((cdf - 0.8571).abs() < 1e-4);
    assert!((p_add(&theta_with_total(2.0), 3) - 0.5 * (1.0 - cdf)).abs() < 1e-15);
    assert!((p_add(&theta_with_total(2.0), 3) - 0.0714).abs() < 1e-4);
}

#[test]
fn p_add_matches_brute_force_poisson_sums() {
    let mut r = rng::stream(1, &[]);
    for _ in 0..1000 {
        let total = r.gen_range(0.0..30.0);
        let k = r.gen_range(0..60usize);
        let got = p_add(&theta_with_total(total), k);
        let want = common::p_add_reference(total, k);
        assert!((got - want).abs() <= 1e-12, "lambda {total} k {k}: {got} vs {want}");
    }
}

proptest! {
    #[test]
    fn p_add_is_bounded_and_monotone(total in 0.0..40.0f64, k in 0usize..80, dl in 0.0..5.0f64) {
        let p = p_add(&theta_with_total(total), k);
        prop_assert!((0.0..=0.5).contains(&p));
        prop_assert!(p_add(&theta_with_total(total), k + 1) <= p);
        prop_assert!(p_add(&theta_with_total(total + dl), k) >= p);
    }
}

#[test]
fn zero_hallucination_weights_are_the_counts() {
    let t = Theta::new(vec![0.0; 3], vec![0.3, 0.6, 0.9]).unwrap();
    assert_eq!(category_weights(&[4, 0, 2], &t), vec![4.0, 1.0, 2.0]);
}

#[test]
fn single_category_is_always_proposed() {
    let t = Theta::uniform(1, 0.7, 0.4).unwrap();
    let mut r = rng::stream(2, &[]);
    for _ in 0..100 {
        assert_eq!(propose_category(&[3], &t, &mut r).unwrap(), 0);
    }
}

#[test]
fn category_frequencies_follow_the_weights() {
    let t = Theta::uniform(2, 0.3, 0.6).unwrap();
    let mut r = rng::stream(3, &[]);
    let n = 100_000;
    let first = (0..n).filter(|_| propose_category(&[2, 1], &t, &mut r).unwrap() == 0).count() as f64 / n as f64;
    assert!((first - 2.0 / 3.0).abs() <= 0.01, "{first}");
}

#[test]
fn all_zero_detection_rates_are_degenerate() {
    let t = Theta::uniform(3, 0.5, 0.0).unwrap();
    assert!(propose_category(&[1, 2, 3], &t, &mut rng::stream(1, &[])).is_err());
}

fn chi_square_uniform(values: &[f64], lo: f64, hi: f64, bins: usize) -> f64 {
    let mut counts = vec![0.0; bins];
    for v in values {
        let b = (((v - lo) / (hi - lo)) * bins as f64).floor() as usize;
        counts[b.min(bins - 1)] += 1.0;
    }
    let e = values.len() as f64 / bins as f64;
    counts.iter().map(|c| (c - e) * (c - e) / e).sum()
}

#[test]
fn locations_without_a_detection_are_uniform() {
    let bounds = RoomBounds::default();
    let pose = CameraPose::new(Vec3::new(0.0, 2.0, 3.0), Vec3::new(0.0, 0.5, 0.0)).unwrap();
    let mut r = rng::stream(4, &[]);
    let pts: Vec<Vec3> = (0..10_000)
        .map(|_| propose_location(None, &pose, &CameraIntrinsics::default(), &bounds, 0.01, &mut r).unwrap())
        .collect();
    for axis in 0..3 {
        let v: Vec<f64> = pts.iter().map(|p| p[axis]).collect();
        // 99.9% point of chi-square with 9 degrees of freedom.
        let chi = chi_square_uniform(&v, bounds.min[axis], bounds.max[axis], 10);
        assert!(chi < 27.88, "axis {axis}: {chi}");
    }
}

#[test]
fn ray_draws_project_back_near_the_detection() {
    let intr = CameraIntrinsics::default();
    let bounds = RoomBounds::default();
    let pose = CameraPose::new(Vec3::new(-4.0, 2.0, 3.0), Vec3::new(0.0, 0.5, 0.0)).unwrap();
    let cam = PinholeCamera::new(&pose, &intr);
    let forward = (pose.focal_point - pose.position).normalize();
    let sigma: f64 = 0.1;
    let mut r = rng::stream(5, &[]);
    let mut close = 0;
    let n = 10_000;
    for i in 0..n {
        let px = (100.0 + (i % 60) as f64 * 10.0, 150.0 + (i % 50) as f64 * 10.0);
        let seg = SegmentRay::new(cam.backproject(px.0, px.1), &bounds).unwrap();
        let x = seg.sample(sigma, &mut r);
        // A draw that lands behind the camera plane counts as a failure.
        let Some((u, v)) = cam.project(&x) else { continue };
        let depth = (x - pose.position).dot(&forward);
        // A perpendicular offset of three standard deviations per axis,
        // seen at this depth, allowing for obliquity away from the axis.
        let tol = 2.0 * intr.focal_px() * 3.0 * std::f64::consts::SQRT_2 * sigma / depth;
        if ((u - px.0).powi(2) + (v - px.1).powi(2)).sqrt() <= tol {
            close += 1;
        }
    }
    assert!(close as f64 >= 0.99 * n as f64, "{close} of {n}");
}

#[test]
fn zero_volume_room_is_rejected() {
    let flat = RoomBounds { min: Vec3::new(-1.0, 0.0, -1.0), max: Vec3::new(1.0, 0.0, 1.0) };
    let pose = CameraPose::new(Vec3::new(0.0, 2.0, 3.0), Vec3::zeros()).unwrap();
    assert!(propose_location(None, &pose, &CameraIntrinsics::default(), &flat, 0.01, &mut rng::stream(1, &[])).is_err());
}

fn room_poses(seed: u64) -> Vec<CameraPose> {
    sample_trajectory(&TrajectoryParams::default(), &mut rng::stream(seed, &[99])).unwrap()
}

fn scene_of(world: &WorldState, theta: &Theta, seed: u64) -> SceneData {
    let noise = NoiseModel { sigma_xy: 10.0, radius: 200.0 };
    let frames = simulate_detections(world, theta, &room_poses(seed), &CameraIntrinsics::default(), &noise, &mut rng::stream(seed, &[7])).unwrap();
    SceneData::new(frames)
}

fn chain(
    scene: &SceneData,
    start: &WorldState,
    theta: &Theta,
    cfg: &FilterConfig,
    seed: u64,
) -> (Particle, MoveStats) {
    let n = theta.num_categories();
    let intr = CameraIntrinsics::default();
    let scorer = SceneScorer::new(scene, &intr, &NoiseModel::default(), n);
    let index = SceneIndex::new(scene, scorer.cameras(), n, &cfg.scene_prior.bounds, cfg.line_variance);
    let ctx = ChainContext { scorer: &scorer, index: &index, cfg, previous_stats: None, move_theta: false };
    let p = Particle::new(start.clone(), theta.clone(), MetaBeliefs::prior(n).unwrap());
    let mut moves = MoveStats::default();
    let out = rejuvenate(&p, &ctx, &mut moves, &mut rng::stream(seed, &[]));
    (out, moves)
}

#[test]
fn zero_sweeps_leave_the_particle_alone() {
    let world = WorldState::new(vec![Object3D::new(Vec3::new(0.0, 0.5, 0.0), 1)]);
    let theta = Theta::uniform(3, 0.5, 0.5).unwrap();
    let scene = scene_of(&world, &theta, 1);
    let cfg = FilterConfig { rejuvenation_sweeps: 0, ..Default::default() };
    let (out, moves) = chain(&scene, &world, &theta, &cfg, 1);
    assert_eq!(out.world, world);
    assert_eq!(out.theta_current, theta);
    assert_eq!(moves, MoveStats::default());
}

#[test]
fn chain_removes_an_unsupported_object() {
    let world = WorldState::new(vec![Object3D::new(Vec3::new(0.0, 0.5, 0.0), 1)]);
    let theta = Theta::uniform(3, 1.0, 0.5).unwrap();
    let silent = Theta::uniform(3, 0.0, 0.0).unwrap();
    let cfg = FilterConfig::default();
    let emptied = (0..100)
        .filter(|&s| {
            let scene = scene_of(&WorldState::empty(), &silent, s);
            chain(&scene, &world, &theta, &cfg, s).0.world.is_empty()
        })
        .count();
    assert!(emptied >= 90, "{emptied} of 100");
}

#[test]
fn chain_adds_a_well_supported_object() {
    let object = Object3D::new(Vec3::new(0.5, 0.5, -0.5), 2);
    let truth = WorldState::new(vec![object]);
    let theta = Theta::uniform(3, 0.01, 0.9).unwrap();
    let cfg = FilterConfig::default();
    let mut found = 0;
    for s in 0..100 {
        let scene = scene_of(&truth, &theta, s);
        let (out, _) = chain(&scene, &WorldState::empty(), &theta, &cfg, 1000 + s);
        let intr = CameraIntrinsics::default();
        let noise = NoiseModel::default();
        let before = scene_log_likelihood(&scene, &WorldState::empty(), &theta, &intr, &noise);
        let after = scene_log_likelihood(&scene, &out.world, &theta, &intr, &noise);
        if out.world.objects.iter().any(|o| o.category == 2) && after > before {
            found += 1;
        }
    }
    assert!(found >= 90, "{found} of 100");
}

#[test]
fn world_edits_balance_on_an_unseen_room() {
    // The only camera looks away from the room, so every world explains the
    // (empty) detections equally well and the chain samples the prior. Its
    // occupancy of the empty and single-object worlds must stand in the prior
    // ratio 1 : (1 - p) = 10 : 1.
    let pose = CameraPose::new(Vec3::new(0.0, 1.5, 100.0), Vec3::new(0.0, 1.5, 200.0)).unwrap();
    let scene = SceneData::new(vec![metacog::FrameObservation { camera: pose, detections: vec![] }]);
    let theta = Theta::uniform(3, 0.05, 0.5).unwrap();
    let cfg = FilterConfig { rejuvenation_sweeps: 1, ..Default::default() };
    let intr = CameraIntrinsics::default();
    let scorer = SceneScorer::new(&scene, &intr, &NoiseModel::default(), 3);
    let index = SceneIndex::new(&scene, scorer.cameras(), 3, &cfg.scene_prior.bounds, cfg.line_variance);
    let ctx = ChainContext { scorer: &scorer, index: &index, cfg: &cfg, previous_stats: None, move_theta: false };
    let mut p = Particle::new(WorldState::empty(), theta, MetaBeliefs::prior(3).unwrap());
    let mut r = rng::stream(6, &[]);
    let mut moves = MoveStats::default();
    let mut counts = [0u64; 2];
    for _ in 0..100_000 {
        p = rejuvenate(&p, &ctx, &mut moves, &mut r);
        if p.world.len() < 2 {
            counts[p.world.len()] += 1;
        }
    }
    let empty = counts[0] as f64 / (counts[0] + counts[1]) as f64;
    assert!((empty - 10.0 / 11.0).abs() <= 0.02, "{empty} ({counts:?})");
}

#[test]
fn resampling_keeps_expected_counts() {
    let mut r = rng::stream(7, &[]);
    for _ in 0..200 {
        let m = r.gen_range(1..60);
        let logw: Vec<f64> = (0..m).map(|_| r.gen_range(-20.0..0.0)).collect();
        let w = smc::normalize(&logw).unwrap();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let idx = smc::systematic_resample(&w, &mut r);
        assert_eq!(idx.len(), m);
        let mut counts = vec![0usize; m];
        for i in idx {
            counts[i] += 1;
        }
        // Systematic resampling keeps every count within one of M w_i.
        for (c, wi) in counts.iter().zip(&w) {
            assert!((*c as f64 - m as f64 * wi).abs() < 1.0 + 1e-9, "{c} vs {}", m as f64 * wi);
        }
        // After resampling the weights are uniform again.
        let ess = smc::effective_sample_size(&vec![1.0 / m as f64; m]);
        assert!((ess - m as f64).abs() < 1e-9 && ess >= 0.5 * m as f64);
        assert!(smc::effective_sample_size(&w) <= m as f64 + 1e-9);
    }
}

fn particle(lambda: f64, log_weight: f64) -> Particle {
    let mut p = Particle::new(WorldState::empty(), Theta::uniform(1, lambda, 0.5).unwrap(), MetaBeliefs::prior(1).unwrap());
    p.log_weight = log_weight;
    p
}

#[test]
fn estimate_v_examples() {
    let same = vec![particle(0.7, -3.0), particle(0.7, -1.0)];
    assert!((estimate_v(&same).unwrap().hallucination[0] - 0.7).abs() < 1e-15);
    let two = vec![particle(1.0, 0.75f64.ln()), particle(3.0, 0.25f64.ln())];
    assert!((estimate_v(&two).unwrap().hallucination[0] - 1.5).abs() < 1e-12);
    let flat: Vec<Particle> = (0..5).map(|i| particle(i as f64, 0.0)).collect();
    assert!((estimate_v(&flat).unwrap().hallucination[0] - 2.0).abs() < 1e-12);
    let dead = vec![particle(1.0, f64::NEG_INFINITY)];
    assert!(estimate_v(&dead).is_err());
}

fn synth_params() -> Synth3dParams {
    Synth3dParams::default()
}

#[test]
fn single_scene_with_a_reliable_detector_finds_both_objects() {
    let theta = Theta::uniform(5, 0.0, 0.95).unwrap();
    let mut params = synth_params();
    params.scene.min_objects = 2;
    params.scene.max_objects = 2;
    let intr = params.intrinsics;
    let exact = (0..20u64)
        .filter(|&s| {
            let scene = synthesize_3d_scene_data(s, 0, &theta, &params).unwrap();
            let truth = scene.ground_truth.clone().unwrap();
            let cfg = FilterConfig { seed: s, ..Default::default() };
            let out = run_filter(&[scene], 5, &cfg, &intr, &NoiseModel::default()).unwrap();
            jaccard(&out.scenes[0].world.category_multiset(), &truth.category_multiset()) == 1.0
        })
        .count();
    assert!(exact >= 18, "{exact} of 20");
}

#[test]
fn repeated_scenes_from_one_detector_drive_the_error_down() {
    let theta = Theta::new(vec![0.1, 0.2, 0.05, 0.3, 0.15], vec![0.7, 0.6, 0.8, 0.5, 0.75]).unwrap();
    let params = synth_params();
    let scenes: Vec<_> = (0..50).map(|i| synthesize_3d_scene_data(2, i, &theta, &params).unwrap()).collect();
    // Score against the rates the detector actually showed on these scenes.
    let measured = ground_truth_theta(&scenes, &params.intrinsics, NoiseModel::default().radius, 5).unwrap();
    let cfg = FilterConfig { seed: 2, ..Default::default() };
    let out = run_filter(&scenes, 5, &cfg, &params.intrinsics, &NoiseModel::default()).unwrap();
    let mse: Vec<f64> = out.scenes.iter().map(|s| measured.mse(&s.theta_hat).unwrap()).collect();
    let pairs = 40;
    let down = (0..pairs).filter(|&t| mse[t + 10] < mse[t]).count();
    assert!(down as f64 >= 0.8 * pairs as f64, "{down} of {pairs}: {mse:?}");
}

#[test]
fn one_particle_without_sweeps_returns_its_prior_draw() {
    let theta = Theta::uniform(5, 0.2, 0.7).unwrap();
    let params = synth_params();
    let scene = synthesize_3d_scene_data(3, 0, &theta, &params).unwrap();
    let cfg = FilterConfig { num_particles: 1, rejuvenation_sweeps: 0, seed: 42, ..Default::default() };
    let out = run_filter(&[scene], 5, &cfg, &params.intrinsics, &NoiseModel::default()).unwrap();
    let drawn = cfg.scene_prior.sample(5, &mut rng::stream(42, &[stage::PROPAGATE, 0, 0]));
    assert_eq!(out.scenes[0].world, drawn);
}

#[test]
fn sceneless_filter_is_rejected_and_sceneless_reinfer_is_empty() {
    let cfg = FilterConfig::default();
    let intr = CameraIntrinsics::default();
    assert!(run_filter(&[], 5, &cfg, &intr, &NoiseModel::default()).is_err());
    let t = Theta::uniform(5, 0.2, 0.7).unwrap();
    assert!(reinfer(&[], &t, &cfg, &intr, &NoiseModel::default()).unwrap().is_empty());
    let frameless = SceneData::new(vec![]);
    assert!(run_filter(&[frameless], 5, &cfg, &intr, &NoiseModel::default()).is_err());
}

#[test]
fn true_rates_reinfer_at_least_as_well_as_lesioned_rates() {
    let theta = Theta::new(vec![0.1, 0.2, 0.05, 0.3, 0.15], vec![0.7, 0.6, 0.8, 0.5, 0.75]).unwrap();
    let params = synth_params();
    let scenes: Vec<SceneData> = (0..50).map(|i| synthesize_3d_scene_data(17, i, &theta, &params).unwrap()).collect();
    let cfg = FilterConfig { num_particles: 50, rejuvenation_sweeps: 100, seed: 17, ..Default::default() };
    let lesioned = MetaBeliefs::prior(5).unwrap().expected_theta();
    let score = |t: &Theta| {
        let worlds = reinfer(&scenes, t, &cfg, &params.intrinsics, &NoiseModel::default()).unwrap();
        worlds
            .iter()
            .zip(&scenes)
            .map(|(w, s)| jaccard(&w.category_multiset(), &s.ground_truth.as_ref().unwrap().category_multiset()))
            .sum::<f64>()
            / scenes.len() as f64
    };
    let (good, bad) = (score(&theta), score(&lesioned));
    assert!(good >= bad, "{good} vs {bad}");
}

#[test]
fn trusted_detector_keeps_every_detected_category() {
    // The data has no hallucinations, so every detected category is a real
    // object. With hallucinations present a stray detection is cheaper to
    // leave unexplained than an object that goes unseen in most frames.
    let truth = Theta::new(vec![0.0; 5], vec![0.7, 0.6, 0.8, 0.5, 0.75]).unwrap();
    let trusting = Theta::uniform(5, 1e-6, 0.999).unwrap();
    let params = synth_params();
    let scenes: Vec<SceneData> = (0..10).map(|i| synthesize_3d_scene_data(5, i, &truth, &params).unwrap()).collect();
    let cfg = FilterConfig { seed: 5, ..Default::default() };
    let worlds = reinfer(&scenes, &trusting, &cfg, &params.intrinsics, &NoiseModel::default()).unwrap();
    for (w, s) in worlds.iter().zip(&scenes) {
        let inferred = w.category_multiset();
        for (c, &k) in s.category_counts(5).iter().enumerate() {
            if k > 0 {
                assert!(inferred.contains(&c), "category {c} detected {k} times, inferred {inferred:?}");
            }
        }
    }
}

#[test]
fn results_do_not_depend_on_the_thread_count() {
    let theta = Theta::new(vec![0.1, 0.2, 0.05, 0.3, 0.15], vec![0.7, 0.6, 0.8, 0.5, 0.75]).unwrap();
    let params = synth_params();
    let scenes: Vec<SceneData> = (0..3).map(|i| synthesize_3d_scene_data(9, i, &theta, &params).unwrap()).collect();
    let cfg = FilterConfig { num_particles: 16, rejuvenation_sweeps: 20, seed: 9, ..Default::default() };
    let run = |threads| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let out = run_filter(&scenes, 5, &cfg, &params.intrinsics, &NoiseModel::default()).unwrap();
            let re = reinfer(&scenes, &out.final_theta, &cfg, &params.intrinsics, &NoiseModel::default()).unwrap();
            (out.scenes, out.final_theta, out.particles, re)
        })
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn back_projected_detection_point_is_recovered_by_projection() {
    let intr = CameraIntrinsics::default();
    let pose = room_poses(1)[0];
    let ray = backproject((250.0, 420.0), &pose, &intr);
    let (u, v) = PinholeCamera::new(&pose, &intr).project(&ray.at(2.0)).unwrap();
    assert!((u - 250.0).abs() < 1e-6 && (v - 420.0).abs() < 1e-6);
}
