use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use metacog::cli::{self, IngestInput, RunConfig, FULL_SCALE_DETECTORS};
use metacog::{CategoryTable, Error};

#[derive(Parser)]
#[command(name = "metacog", version, about = "Learn detector error rates jointly with the world")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scale {
    /// 1,000 presence detectors.
    Desk,
    /// 40,000 presence detectors.
    Full,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    particles: Option<usize>,
    #[arg(long)]
    sweeps: Option<usize>,
    #[arg(long)]
    detectors: Option<usize>,
    #[arg(long)]
    scenes: Option<usize>,
    #[arg(long, value_enum)]
    scale: Option<Scale>,
    /// Comma-separated category labels, in index order.
    #[arg(long, value_delimiter = ',')]
    categories: Option<Vec<String>>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a presence-detector dataset.
    GenLw(Common),
    /// Run the presence-detector study.
    RunLw {
        #[command(flatten)]
        common: Common,
        /// Dataset directory from gen-lw; generated in memory when absent.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Generate synthetic 3D scenes.
    #[command(name = "gen-3d")]
    Gen3d(Common),
    /// Run the closed-loop 3D experiment.
    #[command(name = "run-3d")]
    Run3d {
        #[command(flatten)]
        common: Common,
        /// Scene directory from gen-3d or ingest; generated in memory when absent.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Convert external detections and camera poses to scene files.
    Ingest {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        poses: PathBuf,
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Re-score saved worlds against their scenes.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        worlds: PathBuf,
    },
}

fn load_config(c: &Common) -> metacog::Result<RunConfig> {
    let mut cfg = match &c.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            RunConfig::from_json(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(s) = c.scale {
        cfg.lw.detectors = match s {
            Scale::Desk => 1000,
            Scale::Full => FULL_SCALE_DETECTORS,
        };
    }
    if let Some(v) = c.seed {
        cfg.seed = v;
    }
    if let Some(v) = c.particles {
        cfg.set_particles(v);
    }
    if let Some(v) = c.sweeps {
        cfg.set_sweeps(v);
    }
    if let Some(v) = c.detectors {
        cfg.lw.detectors = v;
    }
    if let Some(v) = c.scenes {
        cfg.full.scenes = v;
    }
    if let Some(names) = &c.categories {
        cfg.categories = CategoryTable::new(names.clone())?;
    }
    Ok(cfg)
}

fn init_threads() -> metacog::Result<()> {
    let Ok(v) = std::env::var("METACOG_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::Config(format!("METACOG_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(e.to_string()))
}

fn run(command: Command) -> metacog::Result<()> {
    init_threads()?;
    match command {
        Command::GenLw(c) => {
            let files = cli::gen_lw(&load_config(&c)?, &c.out)?;
            println!("wrote {} detector files to {}", files.len(), c.out.display());
        }
        Command::RunLw { common, input } => {
            let r = cli::run_lw(&load_config(&common)?, input.as_deref(), &common.out)?;
            let s = &r.summary;
            println!("detectors: {}", s.detectors);
            println!("rate mse: {:.4} -> {:.4} (prior mean {:.4})", s.mse_curve[0], s.final_mse(), s.lesioned_mse);
            println!(
                "accuracy: learning {:.3}, final {:.3}, lesioned {:.3}",
                s.mean_learning_accuracy, s.mean_final_accuracy, s.mean_lesioned_accuracy
            );
        }
        Command::Gen3d(c) => {
            let files = cli::gen_3d(&load_config(&c)?, &c.out)?;
            println!("wrote {} scene files to {}", files.len(), c.out.display());
        }
        Command::Run3d { common, input } => {
            let r = cli::run_3d(&load_config(&common)?, input.as_deref(), &common.out)?;
            if r.degenerate {
                println!("warning: rejuvenation disabled, results reflect the initial draws only");
            }
            for m in &r.models {
                println!("{:<10} 2d {:?} jaccard {:?}", m.model.name(), m.accuracy_2d, m.jaccard);
            }
        }
        Command::Ingest { common, detections, poses, truth } => {
            let input = IngestInput { detections: &detections, poses: &poses, truth: truth.as_deref() };
            let files = cli::ingest(&load_config(&common)?, &input, &common.out)?;
            println!("wrote {} scene files to {}", files.len(), common.out.display());
        }
        Command::Eval { common, input, worlds } => {
            for m in cli::eval(&load_config(&common)?, &input, &worlds, &common.out)? {
                println!("{:<10} 2d {:?} jaccard {:?}", m.model.name(), m.accuracy_2d, m.jaccard);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = match Cli::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(args.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
