//! Step the constant-velocity box tracker through a car driving at one voxel
//! per frame, with a missed detection in the middle.
//!
//!     cargo run --example kalman_tracker

use pot4d::grid::{GridGeometry, LabelSpec, PanopticGrid};
use pot4d::track::{FrameInstances, KalmanParams, KalmanTracker};

fn main() -> pot4d::Result<()> {
    let spec = LabelSpec::new(vec!["free".into(), "car".into()], vec![false, true], 0, None)?;
    let geom = GridGeometry::new([0.0; 3], [0.5; 3], [30, 6, 2])?;
    let mut tracker = KalmanTracker::new(KalmanParams::default());

    for t in 0..8u32 {
        let mut frame = PanopticGrid::filled(geom, spec.free_class);
        if t != 4 {
            for x in t + 2..t + 10 {
                for y in 1..5 {
                    frame.set(geom.linear([x, y, 0]), 1, 100 + t);
                }
            }
        }
        let ids = tracker.step(&FrameInstances::extract(&frame, None));
        for tr in tracker.tracks() {
            println!(
                "t={t} ids {:?} track {} x={:.2} vx={:.2} misses {}",
                ids.values().collect::<Vec<_>>(),
                tr.id,
                tr.position()[0],
                tr.velocity()[0],
                tr.misses
            );
        }
    }
    Ok(())
}
