mod common;

use metacog::cli::formats::{read_lw_detector, read_scene, write_lw_detector, write_scene, Header};
use metacog::eval::{full_theta_mse, ground_truth_theta};
use metacog::geometry::{RoomBounds, Vec3};
use metacog::lightweight::{LwTheta, LwWorldPrior};
use metacog::rng;
use metacog::simulator::{
    sample_lw_detector, sample_lw_detector_data, sample_lw_frame, sample_lw_world, synthesize_3d_dataset,
    synthesize_3d_scene, synthesize_lw_dataset, synthesize_lw_detector, LwDatasetParams, SceneParams, Synth3dParams,
};
use metacog::{CategoryTable, Error, Theta};

/// Pearson chi-square statistic of observed counts against expected ones.
fn chi_square(observed: &[usize], expected: &[f64]) -> f64 {
    observed.iter().zip(expected).map(|(&o, &e)| (o as f64 - e).powi(2) / e).sum()
}

fn theta_3d() -> Theta {
    Theta::new(vec![0.1, 0.2, 0.05, 0.3, 0.15], vec![0.7, 0.6, 0.8, 0.5, 0.75]).unwrap()
}

#[test]
fn detector_rates_follow_beta_two_ten() {
    let mut r = rng::stream(1, &[]);
    let n = 100_000;
    let (mut sum, mut above, mut any_above) = (vec![0.0; 10], 0usize, 0usize);
    for _ in 0..n {
        let t = sample_lw_detector(5, 2.0, 10.0, &mut r).unwrap();
        let entries: Vec<f64> = t.hallucination.iter().chain(&t.miss).copied().collect();
        for (s, x) in sum.iter_mut().zip(&entries) {
            *s += x;
        }
        let k = entries.iter().filter(|&&x| x > 0.5).count();
        above += k;
        any_above += (k > 0) as usize;
    }
    for s in &sum {
        assert!((s / n as f64 - 1.0 / 6.0).abs() <= 0.002, "{}", s / n as f64);
    }
    let p_above = above as f64 / (10 * n) as f64;
    assert!((p_above - 0.005).abs() <= 0.001, "{p_above}");
    let exact = common::beta_upper_tail(2, 10, 0.5);
    let se = (exact * (1.0 - exact) / (10 * n) as f64).sqrt();
    assert!((p_above - exact).abs() <= 4.0 * se, "{p_above} vs {exact}");
    let p_any = any_above as f64 / n as f64;
    assert!((p_any - 0.06).abs() <= 0.005, "{p_any}");
}

#[test]
fn world_counts_follow_the_truncated_poisson() {
    let prior = LwWorldPrior::default();
    let mut r = rng::stream(2, &[]);
    let n = 100_000;
    let mut ones = 0usize;
    let mut presence = [0usize; 5];
    for _ in 0..n {
        let w = sample_lw_world(&prior, 5, &mut r);
        let k = w.count();
        assert!((1..=5).contains(&k));
        ones += (k == 1) as usize;
        for (p, &b) in presence.iter_mut().zip(&w.presence) {
            *p += b as usize;
        }
    }
    let z: f64 = (1..=5).map(|k| 1.0 / (1..=k).product::<usize>() as f64).sum();
    let p1 = 1.0 / z;
    assert!((p1 - 0.5824).abs() < 5e-4, "{p1}");
    assert!((ones as f64 / n as f64 - p1).abs() <= 0.01);
    let total: usize = presence.iter().sum();
    // Four degrees of freedom, 0.1% level.
    assert!(chi_square(&presence, &[total as f64 / 5.0; 5]) < 18.47, "{presence:?}");
}

#[test]
fn frame_counts_are_uniform_between_five_and_fifteen() {
    let data = synthesize_lw_dataset(200, 3, &LwDatasetParams::default()).unwrap();
    let mut counts = [0usize; 11];
    for d in &data {
        assert_eq!(d.worlds.len(), 75);
        for w in &d.worlds {
            let n = w.frames.len();
            assert!((5..=15).contains(&n));
            counts[n - 5] += 1;
        }
    }
    let total: usize = counts.iter().sum();
    // Ten degrees of freedom, 0.1% level.
    assert!(chi_square(&counts, &[total as f64 / 11.0; 11]) < 29.59, "{counts:?}");
}

#[test]
fn perfect_detector_frames_equal_their_worlds() {
    let d = sample_lw_detector_data(0, LwTheta::uniform(5, 0.0, 0.0), &LwDatasetParams::default(), &mut rng::stream(4, &[]));
    for w in &d.worlds {
        for f in &w.frames {
            assert_eq!(f.detected, w.truth.as_ref().unwrap().presence);
        }
    }
}

#[test]
fn flip_frequencies_match_the_rates() {
    let theta = LwTheta::new(vec![0.05, 0.3, 0.5], vec![0.1, 0.25, 0.6]).unwrap();
    let mut r = rng::stream(5, &[]);
    let prior = LwWorldPrior { count_rate: 1.0, min_count: 0, max_count: 3 };
    let (mut present, mut missed, mut absent, mut halluc) = ([0usize; 3], [0usize; 3], [0usize; 3], [0usize; 3]);
    for _ in 0..20_000 {
        let w = sample_lw_world(&prior, 3, &mut r);
        let f = sample_lw_frame(&w, &theta, &mut r);
        for c in 0..3 {
            if w.presence[c] {
                present[c] += 1;
                missed[c] += !f.detected[c] as usize;
            } else {
                absent[c] += 1;
                halluc[c] += f.detected[c] as usize;
            }
        }
    }
    let within = |k: usize, n: usize, p: f64| {
        let se = (p * (1.0 - p) / n as f64).sqrt();
        (k as f64 / n as f64 - p).abs() <= 3.0 * se
    };
    for c in 0..3 {
        assert!(within(missed[c], present[c], theta.miss[c]), "miss {c}");
        assert!(within(halluc[c], absent[c], theta.hallucination[c]), "hallucination {c}");
    }
}

#[test]
fn separate_seeds_give_unrelated_detectors() {
    let params = LwDatasetParams { worlds_per_detector: 1, ..Default::default() };
    let n = 2000;
    let mean = |seed| -> Vec<f64> {
        (0..n)
            .map(|id| {
                let t = synthesize_lw_detector(seed, id, &params).unwrap().theta.unwrap();
                t.hallucination.iter().chain(&t.miss).sum::<f64>() / 10.0
            })
            .collect()
    };
    let (a, b) = (mean(10), mean(11));
    let (ma, mb) = (a.iter().sum::<f64>() / n as f64, b.iter().sum::<f64>() / n as f64);
    let cov: f64 = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    let corr = cov / (va * vb).sqrt();
    assert!(corr.abs() < 4.0 / (n as f64).sqrt(), "{corr}");
}

#[test]
fn objects_keep_their_distance_from_each_other_and_the_walls() {
    let params = SceneParams::default();
    let b = RoomBounds::default();
    let mut r = rng::stream(6, &[]);
    for _ in 0..2000 {
        let (world, poses) = synthesize_3d_scene(&params, &mut r).unwrap();
        assert_eq!(poses.len(), 20);
        for (i, o) in world.objects.iter().enumerate() {
            let p = o.position;
            assert!(p.x - b.min.x >= 1.0 && b.max.x - p.x >= 1.0 && p.z - b.min.z >= 1.0 && b.max.z - p.z >= 1.0);
            for q in &world.objects[i + 1..] {
                assert!((p - q.position).norm() >= 1.0);
            }
        }
    }
}

#[test]
fn object_counts_are_uniform_on_one_to_three() {
    let params = SceneParams::default();
    let mut r = rng::stream(7, &[]);
    let mut counts = [0usize; 3];
    for _ in 0..10_000 {
        let (world, _) = synthesize_3d_scene(&params, &mut r).unwrap();
        counts[world.objects.len() - 1] += 1;
    }
    // Two degrees of freedom, 0.1% level.
    assert!(chi_square(&counts, &[10_000.0 / 3.0; 3]) < 13.82, "{counts:?}");
}

#[test]
fn overcrowded_rooms_are_reported() {
    let params = SceneParams {
        min_objects: 3,
        max_objects: 3,
        separation: 1.0,
        bounds: RoomBounds { min: Vec3::new(-1.2, 0.0, -1.2), max: Vec3::new(1.2, 3.0, 1.2) },
        ..Default::default()
    };
    let err = synthesize_3d_scene(&params, &mut rng::stream(8, &[])).unwrap_err();
    assert!(matches!(err, Error::Overcrowded { .. }), "{err}");
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn silent_detector_produces_empty_frames() {
    let zero = Theta::uniform(5, 0.0, 0.0).unwrap();
    for s in synthesize_3d_dataset(10, 9, &zero, &Synth3dParams::default()).unwrap() {
        assert!(s.frames.iter().all(|f| f.detections.is_empty()));
    }
}

#[test]
fn datasets_are_reproducible() {
    let params = Synth3dParams::default();
    assert_eq!(
        synthesize_3d_dataset(5, 10, &theta_3d(), &params).unwrap(),
        synthesize_3d_dataset(5, 10, &theta_3d(), &params).unwrap()
    );
    let lw = LwDatasetParams::default();
    assert_eq!(synthesize_lw_dataset(3, 10, &lw).unwrap(), synthesize_lw_dataset(3, 10, &lw).unwrap());
}

#[test]
fn measured_rates_approach_the_true_rates() {
    let params = Synth3dParams::default();
    let scenes = synthesize_3d_dataset(50, 11, &theta_3d(), &params).unwrap();
    let gt = ground_truth_theta(&scenes, &params.intrinsics, params.detector_noise.radius, 5).unwrap();
    assert_eq!(gt.frames, 1000);
    let measured = Theta::new(
        gt.hallucination.clone(),
        gt.miss.iter().map(|m| 1.0 - m.expect("every category seen")).collect(),
    )
    .unwrap();
    let mse = full_theta_mse(&measured, &theta_3d()).unwrap();
    assert!(mse <= 0.02, "{mse}");
}

#[test]
fn dataset_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let table = CategoryTable::default_five();

    let lw = synthesize_lw_detector(12, 3, &LwDatasetParams::default()).unwrap();
    let path = dir.path().join("detector.jsonl");
    write_lw_detector(&path, Header::new("", 12, "abc", &table), &lw).unwrap();
    let (header, back) = read_lw_detector(&path).unwrap();
    assert_eq!(back, lw);
    assert_eq!(header.seed, 12);

    let params = Synth3dParams::default();
    let scene = synthesize_3d_dataset(1, 12, &theta_3d(), &params).unwrap().remove(0);
    let path = dir.path().join("scene.jsonl");
    let mut header = Header::new("", 12, "abc", &table);
    header.intrinsics = Some(params.intrinsics);
    write_scene(&path, header, 0, &scene).unwrap();
    let (_, back) = read_scene(&path).unwrap();
    assert_eq!(back, scene);
}
