//! Turn box detections and camera poses from an external detector into the
//! scene files the other commands read.
//!
//! ```text
//! cargo run --example ingest_detections -- [output dir]
//! ```

use std::fs;
use std::path::PathBuf;

use metacog::cli::formats::read_scene_dir;
use metacog::cli::{ingest, IngestInput, RunConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out: PathBuf = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("metacog_ingest"), PathBuf::from);
    fs::create_dir_all(&out)?;
    let detections = out.join("detections.csv");
    let poses = out.join("poses.csv");
    fs::write(
        &detections,
        "video,frame,label,x_min,y_min,x_max,y_max\n\
         kitchen,0,chair,100,100,300,200\n\
         kitchen,0,bowl,500,420,560,470\n\
         kitchen,1,chair,120,110,310,210\n",
    )?;
    fs::write(
        &poses,
        "video,frame,px,py,pz,fx,fy,fz\n\
         kitchen,0,0,2,5,0,1,0\n\
         kitchen,1,0.2,2,5,0,1,0\n",
    )?;

    let input = IngestInput { detections: &detections, poses: &poses, truth: None };
    for path in ingest(&RunConfig::default(), &input, &out)? {
        println!("wrote {}", path.display());
    }
    let (_, scenes) = read_scene_dir(&out.join("scenes"))?;
    for (index, scene) in &scenes {
        for (f, frame) in scene.frames.iter().enumerate() {
            let points: Vec<_> = frame.detections.iter().map(|d| (d.x, d.y, d.category)).collect();
            println!("scene {index} frame {f}: {points:?}");
        }
    }
    Ok(())
}
