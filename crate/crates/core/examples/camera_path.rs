//! Sample a camera path through the room, follow one object across the
//! frames, and cast a ray back out of every pixel it lands on.
//!
//! ```text
//! cargo run --example camera_path -- [seed]
//! ```

use metacog::geometry::{backproject, is_visible, project, sample_trajectory, CameraIntrinsics, TrajectoryParams, Vec3};
use metacog::rng;

fn main() -> metacog::Result<()> {
    let seed: u64 = std::env::args().nth(1).map_or(5, |a| a.parse().expect("seed"));
    let intr = CameraIntrinsics::default();
    let poses = sample_trajectory(&TrajectoryParams::default(), &mut rng::stream(seed, &[]))?;
    let object = Vec3::new(0.5, 0.4, -0.5);

    for (i, pose) in poses.iter().enumerate() {
        let p = pose.position;
        let Some(px) = project(&object, pose, &intr).filter(|_| is_visible(&object, pose, &intr)) else {
            println!("frame {i:>2}  camera ({:5.2}, {:4.2}, {:5.2})  object out of view", p.x, p.y, p.z);
            continue;
        };
        // The object sits somewhere along the ray through its pixel.
        let ray = backproject(px, pose, &intr);
        let along = (object - ray.origin).dot(&ray.direction);
        let gap = (ray.at(along) - object).norm();
        println!(
            "frame {i:>2}  camera ({:5.2}, {:4.2}, {:5.2})  pixel ({:6.1}, {:6.1})  depth {along:5.2}  ray miss {gap:.1e}",
            p.x, p.y, p.z, px.0, px.1
        );
    }
    Ok(())
}
