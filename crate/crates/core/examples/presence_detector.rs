//! Learn one presence detector's hallucination and miss rates from its
//! frames alone, then re-read every world with the learned rates.
//!
//! ```text
//! cargo run --release --example presence_detector -- [detector id] [seed]
//! ```

use metacog::eval::{faultiness, jaccard_presence, theta_mse};
use metacog::lightweight::{lw_reinfer, lw_run_filter, LwConfig, LwTheta};
use metacog::simulator::{synthesize_lw_detector, LwDatasetParams};

fn main() -> metacog::Result<()> {
    let mut args = std::env::args().skip(1);
    let id: u64 = args.next().map_or(0, |a| a.parse().expect("detector id"));
    let seed: u64 = args.next().map_or(1, |a| a.parse().expect("seed"));

    let data = synthesize_lw_detector(seed, id, &LwDatasetParams::default())?;
    let truth = data.theta.clone().expect("simulated detectors carry their rates");
    let frames = data.frames();
    let cfg = LwConfig { seed, ..LwConfig::default() };
    let out = lw_run_filter(&frames, &cfg)?;

    for (t, theta) in out.theta_trajectory.iter().enumerate().filter(|(t, _)| t % 15 == 0) {
        println!("world {:>2}: rate error {:.4}", t + 1, theta_mse(theta, &truth)?);
    }
    println!("final:    rate error {:.4}", theta_mse(&out.final_theta, &truth)?);
    println!("hallucination {:.3?} (true {:.3?})", out.final_theta.hallucination, truth.hallucination);
    println!("miss          {:.3?} (true {:.3?})", out.final_theta.miss, truth.miss);

    let learned = lw_reinfer(&frames, &out.final_theta, &cfg)?;
    let lesioned = lw_reinfer(&frames, &LwTheta::lesioned(5), &cfg)?;
    let (mut a, mut b, mut z) = (0.0, 0.0, 0.0);
    for ((record, l), s) in data.worlds.iter().zip(&learned).zip(&lesioned) {
        let world = record.truth.as_ref().expect("simulated worlds are known");
        a += jaccard_presence(l, world);
        b += jaccard_presence(s, world);
        z += faultiness(&record.frames, world)?;
    }
    let n = data.worlds.len() as f64;
    println!("mean faultiness {:.3}; accuracy {:.3} with learned rates, {:.3} with the prior mean", z / n, a / n, b / n);
    Ok(())
}
