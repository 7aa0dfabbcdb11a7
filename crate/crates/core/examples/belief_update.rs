//! Compare a known world with the detections of one simulated scene and turn
//! the hallucinations and misses into updated beliefs about the detector.
//!
//! ```text
//! cargo run --example belief_update -- [scenes] [seed]
//! ```

use metacog::generative::{scene_log_likelihood, NoiseModel};
use metacog::model::{diff_world_detections, update_beliefs};
use metacog::simulator::{synthesize_3d_scene_data, Synth3dParams};
use metacog::{MetaBeliefs, Theta, WorldState};

fn main() -> metacog::Result<()> {
    let mut args = std::env::args().skip(1);
    let scenes: u64 = args.next().map_or(20, |a| a.parse().expect("scene count"));
    let seed: u64 = args.next().map_or(4, |a| a.parse().expect("seed"));

    let theta_true = Theta::new(vec![0.1, 0.2, 0.05, 0.3, 0.15], vec![0.7, 0.6, 0.8, 0.5, 0.75])?;
    let synth = Synth3dParams::default();
    let noise = NoiseModel::default();
    let mut beliefs = MetaBeliefs::prior(5)?;

    for index in 0..scenes {
        let scene = synthesize_3d_scene_data(seed, index, &theta_true, &synth)?;
        let world = scene.ground_truth.clone().expect("simulated scenes carry their world");
        let diffs: Vec<_> = scene
            .frames
            .iter()
            .map(|f| diff_world_detections(&world, f, &synth.intrinsics, noise.radius, 5))
            .collect();
        beliefs = update_beliefs(&beliefs, &diffs, scene.frames.len())?;

        if index == 0 {
            let truth = scene_log_likelihood(&scene, &world, &theta_true, &synth.intrinsics, &noise);
            let empty = scene_log_likelihood(&scene, &WorldState::empty(), &theta_true, &synth.intrinsics, &noise);
            println!("scene 0: {} objects, log likelihood {truth:.1} (empty room {empty:.1})", world.objects.len());
        }
    }

    let mean = beliefs.expected_theta();
    println!("after {scenes} scenes with the true worlds known:");
    for c in 0..5 {
        println!(
            "  category {c}: hallucination {:.3} (true {:.2})  detection {:.3} (true {:.2})",
            mean.hallucination[c], theta_true.hallucination[c], mean.detection[c], theta_true.detection[c]
        );
    }
    Ok(())
}
