use metacog::geometry::{
    backproject, is_visible, project, sample_trajectory, CameraIntrinsics, CameraPose, RbfKernel, TrajectoryParams,
    Vec3,
};
use metacog::rng;
use proptest::prelude::*;
use rand::Rng;

fn pose() -> CameraPose {
    CameraPose::new(Vec3::new(1.0, 2.0, 4.0), Vec3::new(0.0, 0.5, 0.0)).unwrap()
}

fn level_pose() -> CameraPose {
    CameraPose::new(Vec3::new(0.0, 1.0, 5.0), Vec3::new(0.0, 1.0, 0.0)).unwrap()
}

#[test]
fn focal_point_projects_to_center() {
    let intr = CameraIntrinsics { width: 640, height: 480, vertical_fov: 50.0 };
    let (x, y) = project(&pose().focal_point, &pose(), &intr).unwrap();
    assert!((x - 320.0).abs() < 1e-9 && (y - 240.0).abs() < 1e-9);
    assert!(is_visible(&pose().focal_point, &pose(), &intr));
}

#[test]
fn points_behind_the_camera_do_not_project() {
    let intr = CameraIntrinsics::default();
    let p = level_pose();
    let behind = Vec3::new(0.0, 1.0, 7.0);
    assert!(project(&behind, &p, &intr).is_none());
    assert!(!is_visible(&behind, &p, &intr));
}

#[test]
fn half_fov_offset_lands_on_the_right_edge() {
    // Square image, so the horizontal fov equals the vertical one.
    let intr = CameraIntrinsics::default();
    let p = level_pose();
    let dist = 5.0;
    let offset = (0.5 * intr.vertical_fov.to_radians()).tan() * dist;
    let (x, y) = project(&Vec3::new(offset, 1.0, 0.0), &p, &intr).unwrap();
    assert!((x - intr.width as f64).abs() < 1e-9, "{x}");
    assert!((y - 400.0).abs() < 1e-9);
}

#[test]
fn one_pixel_past_the_edge_is_not_visible() {
    let intr = CameraIntrinsics::default();
    let p = level_pose();
    let ray = backproject((intr.width as f64 + 1.0, 400.0), &p, &intr);
    let point = ray.at(3.0);
    let (x, _) = project(&point, &p, &intr).unwrap();
    assert!((x - 801.0).abs() < 1e-6);
    assert!(!is_visible(&point, &p, &intr));
}

#[test]
fn center_pixel_backprojects_along_view_axis() {
    let intr = CameraIntrinsics::default();
    let p = pose();
    let ray = backproject((400.0, 400.0), &p, &intr);
    let axis = (p.focal_point - p.position).normalize();
    assert!((ray.direction - axis).norm() < 1e-12);
    assert_eq!(ray.origin, p.position);
}

#[test]
fn corner_pixel_ray_sits_at_half_fov_diagonal() {
    let intr = CameraIntrinsics::default();
    let p = level_pose();
    let ray = backproject((0.0, 0.0), &p, &intr);
    let t = (0.5 * intr.vertical_fov.to_radians()).tan();
    // Left and up of a camera looking down -z.
    let expected = Vec3::new(-t, t, -1.0).normalize();
    assert!((ray.direction - expected).norm() < 1e-12, "{:?}", ray.direction);
}

#[test]
fn round_trip_within_a_micro_pixel() {
    let mut r = rng::stream(11, &[]);
    let intr = CameraIntrinsics::default();
    for _ in 0..1000 {
        let position = Vec3::new(r.gen_range(-5.0..5.0), r.gen_range(0.5..3.0), r.gen_range(-4.0..4.0));
        let focal = Vec3::new(r.gen_range(-1.0..1.0), r.gen_range(0.0..1.0), r.gen_range(-1.0..1.0));
        let Ok(p) = CameraPose::new(position, focal) else { continue };
        let px = (r.gen_range(0.0..800.0), r.gen_range(0.0..800.0));
        let ray = backproject(px, &p, &intr);
        assert!((ray.direction.norm() - 1.0).abs() < 1e-9);
        for t in [0.1, 1.0, 10.0] {
            let (x, y) = project(&ray.at(t), &p, &intr).unwrap();
            assert!((x - px.0).abs() <= 1e-6 && (y - px.1).abs() <= 1e-6, "{px:?} -> {x},{y}");
        }
    }
}

#[test]
fn camera_height_is_exactly_two() {
    let poses = sample_trajectory(&TrajectoryParams::default(), &mut rng::stream(5, &[])).unwrap();
    assert_eq!(poses.len(), 20);
    assert!(poses.iter().all(|p| p.position.y == 2.0));
}

#[test]
fn vanishing_kernel_gives_the_exact_loop() {
    let params = TrajectoryParams {
        path_kernel: RbfKernel::new(1e-12, 2.5).unwrap(),
        focal_kernel: RbfKernel::new(1e-12, 2.0).unwrap(),
        start_angle: Some(0.0),
        ..TrajectoryParams::default()
    };
    let poses = sample_trajectory(&params, &mut rng::stream(5, &[])).unwrap();
    let (angles, _) = params.frame_parameters(0.0);
    for (p, a) in poses.iter().zip(angles) {
        assert!((p.position - params.base_position(a)).norm() < 1e-9);
        assert!((p.focal_point - params.focal_mean).norm() < 1e-9);
    }
}

#[test]
fn gp_sample_covariance_matches_the_kernel() {
    let k = RbfKernel::new(0.7, 2.5).unwrap();
    let inputs = [0.0, 1.0, 2.5, 5.0];
    let n = 4000;
    let paths = k.sample_paths(&inputs, n, &mut rng::stream(6, &[]));
    for i in 0..inputs.len() {
        for j in i..inputs.len() {
            let cov: f64 = paths.iter().map(|p| p[i] * p[j]).sum::<f64>() / n as f64;
            let want = k.eval(inputs[i], inputs[j]);
            // Standard error of a product moment is at most sigma^2 sqrt(2 / n).
            let se = 0.49 * (2.0 / n as f64).sqrt();
            assert!((cov - want).abs() < 4.0 * se, "({i},{j}): {cov} vs {want}");
        }
    }
}

#[test]
fn non_positive_kernels_are_rejected() {
    assert!(RbfKernel::new(0.0, 1.0).is_err());
    assert!(RbfKernel::new(1.0, -1.0).is_err());
    let params = TrajectoryParams { path_kernel: RbfKernel { sigma: -0.7, length: 2.5 }, ..Default::default() };
    assert!(sample_trajectory(&params, &mut rng::stream(1, &[])).is_err());
}

proptest! {
    #[test]
    fn trajectories_are_deterministic(seed in any::<u64>(), frames in 1usize..30) {
        let params = TrajectoryParams { num_frames: frames, ..Default::default() };
        let a = sample_trajectory(&params, &mut rng::stream(seed, &[])).unwrap();
        let b = sample_trajectory(&params, &mut rng::stream(seed, &[])).unwrap();
        prop_assert_eq!(a.len(), frames);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn visible_implies_projectable(x in -8.0..8.0f64, y in -1.0..4.0f64, z in -6.0..6.0f64) {
        let intr = CameraIntrinsics::default();
        let p = Vec3::new(x, y, z);
        let pr = project(&p, &pose(), &intr);
        if is_visible(&p, &pose(), &intr) {
            let (u, v) = pr.unwrap();
            prop_assert!(intr.contains(u, v));
        }
        if pr.is_none() {
            prop_assert!(!is_visible(&p, &pose(), &intr));
        }
    }
}
