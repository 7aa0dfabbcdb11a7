//! Simulate faulty presence detectors and compare the learning model with
//! the lesioned one.
//!
//! ```text
//! cargo run --release --example robustness_sweep -- [detectors] [seed]
//! ```

use metacog::cli::lw::{evaluate_lw_dataset, summarize_lw};
use metacog::lightweight::LwConfig;
use metacog::simulator::{synthesize_lw_dataset, LwDatasetParams};

fn main() -> metacog::Result<()> {
    let mut args = std::env::args().skip(1);
    let detectors: usize = args.next().map_or(200, |a| a.parse().expect("detector count"));
    let seed: u64 = args.next().map_or(1, |a| a.parse().expect("seed"));
    let mut cfg = LwConfig::default();
    if let Some(p) = args.next() {
        cfg.world_proposal = serde_json::from_str(&format!("\"{p}\"")).expect("prior or posterior");
    }
    if let Some(e) = args.next() {
        cfg.world_estimate = serde_json::from_str(&format!("\"{e}\"")).expect("marginal or vote");
    }

    let t0 = std::time::Instant::now();
    let data = synthesize_lw_dataset(detectors, seed, &LwDatasetParams::default())?;
    let reports = evaluate_lw_dataset(&data, &cfg, seed)?;
    let s = summarize_lw(&reports)?;
    println!("{} detectors in {:.1?}", s.detectors, t0.elapsed());
    println!("mse: first {:.4} final {:.4} (prior mean {:.4})", s.mse_curve[0], s.final_mse(), s.lesioned_mse);
    println!(
        "accuracy: learning {:.3} -> {:.3} (world 40: {:.3}), mean {:.3}; final {:.3}; lesioned {:.3}",
        s.learning_curve[0],
        s.learning_curve.last().unwrap(),
        s.learning_curve[39.min(s.learning_curve.len() - 1)],
        s.mean_learning_accuracy,
        s.mean_final_accuracy,
        s.mean_lesioned_accuracy
    );
    if let Some((x, d)) = s.peak_difference() {
        println!("peak gain {d:+.3} at faultiness {x:.2}; crossover {:?}", s.crossover());
    }
    for (x, d) in s.difference_by_faultiness.iter().step_by(5) {
        println!("  faultiness {x:.2}: gain {d:+.3}");
    }
    if let Some(r) = s.mse_regression {
        println!("mse ~ faultiness: slope {:.2e} (p = {:.1e})", r.slope, r.p_value);
    }
    Ok(())
}
