//! Learn a simulated detector's error rates from 3D scenes and compare the
//! estimate with the truth after every scene.
//!
//! ```text
//! cargo run --release --example closed_loop -- [scenes] [particles] [sweeps]
//! ```

use metacog::eval::{full_theta_mse, ground_truth_theta};
use metacog::generative::NoiseModel;
use metacog::inference::{run_filter_with_observer, FilterConfig};
use metacog::simulator::{synthesize_3d_dataset, Synth3dParams};
use metacog::{MetaBeliefs, Theta};

fn main() -> metacog::Result<()> {
    let mut args = std::env::args().skip(1);
    let scenes: usize = args.next().map_or(10, |a| a.parse().expect("scene count"));
    let particles: usize = args.next().map_or(100, |a| a.parse().expect("particle count"));
    let sweeps: usize = args.next().map_or(200, |a| a.parse().expect("sweep count"));

    let theta_true = Theta::new(vec![0.1, 0.2, 0.05, 0.3, 0.15], vec![0.7, 0.6, 0.8, 0.5, 0.75])?;
    let synth = Synth3dParams::default();
    let data = synthesize_3d_dataset(scenes, 3, &theta_true, &synth)?;
    let noise = NoiseModel::default();
    let measured = ground_truth_theta(&data, &synth.intrinsics, noise.radius, 5)?;
    let prior = MetaBeliefs::prior(5)?.expected_theta();
    println!(
        "prior-mean error: {:.4} vs truth, {:.4} vs measured",
        full_theta_mse(&prior, &theta_true)?,
        measured.mse(&prior)?
    );

    let cfg = FilterConfig {
        num_particles: particles,
        rejuvenation_sweeps: sweeps,
        seed: 11,
        ..FilterConfig::default()
    };
    let t0 = std::time::Instant::now();
    let result = run_filter_with_observer(&data, 5, &cfg, &synth.intrinsics, &noise, |t, s| {
        println!(
            "scene {:>3}  {:>6.1?}  mse {:.4}  ess {:>5.1}  objects {} (truth {})  accept world {:.2} move {:.2} theta {:.2}",
            t + 1,
            t0.elapsed(),
            full_theta_mse(&s.theta_hat, &theta_true).unwrap(),
            s.ess,
            s.world.objects.len(),
            data[t].ground_truth.as_ref().map_or(0, |w| w.objects.len()),
            s.moves.world_acceptance(),
            s.moves.location_acceptance(),
            s.moves.theta_acceptance(),
        );
    })?;
    println!("final estimate: {:?}", result.final_theta);
    Ok(())
}
