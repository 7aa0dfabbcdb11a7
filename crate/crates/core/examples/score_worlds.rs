//! Score inferred worlds the three ways the experiments do: projected points
//! against ground-truth boxes, category overlap, and matched 3D distance.
//!
//! ```text
//! cargo run --release --example score_worlds -- [particles] [sweeps]
//! ```

use metacog::eval::{accuracy_3d, video_accuracy_2d, world_points};
use metacog::generative::NoiseModel;
use metacog::inference::{reinfer, FilterConfig};
use metacog::simulator::{synthesize_3d_dataset, Synth3dParams};
use metacog::geometry::CameraPose;
use metacog::Theta;

fn main() -> metacog::Result<()> {
    let mut args = std::env::args().skip(1);
    let particles: usize = args.next().map_or(50, |a| a.parse().expect("particle count"));
    let sweeps: usize = args.next().map_or(100, |a| a.parse().expect("sweep count"));

    let theta = Theta::new(vec![0.1, 0.2, 0.05, 0.3, 0.15], vec![0.7, 0.6, 0.8, 0.5, 0.75])?;
    let synth = Synth3dParams::default();
    let scenes = synthesize_3d_dataset(5, 9, &theta, &synth)?;
    let cfg = FilterConfig { num_particles: particles, rejuvenation_sweeps: sweeps, seed: 9, ..FilterConfig::default() };
    // Re-reading with the true rates shows what a perfectly learned detector
    // model would give.
    let worlds = reinfer(&scenes, &theta, &cfg, &synth.intrinsics, &NoiseModel::default())?;

    for (i, (scene, world)) in scenes.iter().zip(&worlds).enumerate() {
        let truth = scene.ground_truth.as_ref().expect("simulated");
        let boxes = scene.truth_boxes.as_ref().expect("simulated");
        let poses: Vec<CameraPose> = scene.frames.iter().map(|f| f.camera).collect();
        let raw: Vec<_> = scene.frames.iter().map(|f| f.detections.clone()).collect();
        let ours = video_accuracy_2d(&world_points(world, &poses, &synth.intrinsics), boxes)?;
        let detections = video_accuracy_2d(&raw, boxes)?;
        let (jaccard, distance) = accuracy_3d(world, truth);
        println!(
            "scene {i}: objects {} (truth {})  2D {ours:.3} (raw detections {detections:.3})  categories {jaccard:.3}  distance {}",
            world.objects.len(),
            truth.objects.len(),
            distance.map_or("n/a".to_string(), |d| format!("{d:.3}"))
        );
    }
    Ok(())
}
