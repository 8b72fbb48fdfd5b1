//! A prediction that paints a tracked car one voxel into free space.
//!
//! The corrected association score sees the extra voxel, the flawed variant
//! (predictions clipped to ground-truth occupied space) does not.
//!
//!     cargo run --example flawed_metric

use pot4d::grid::{GridGeometry, LabelSpec, PanopticGrid, TrackedSequence};
use pot4d::metrics::stq_report;

fn main() -> pot4d::Result<()> {
    let spec = LabelSpec::new(
        vec!["free".into(), "road".into(), "car".into()],
        vec![false, false, true],
        0,
        None,
    )?;
    let geom = GridGeometry::unit([4, 1, 1])?;

    // road | car 7 | free | free
    let mut gt = PanopticGrid::filled(geom, 0);
    gt.set(0, 1, 0);
    gt.set(1, 2, 7);
    let mut pred = gt.clone();
    pred.set(2, 2, 7);

    let gt = TrackedSequence::from_frames(spec.clone(), geom, vec![gt])?;
    let pred = TrackedSequence::from_frames(spec, geom, vec![pred])?;

    let corrected = stq_report(&gt, &pred, false)?;
    let flawed = stq_report(&gt, &pred, true)?;
    println!("corrected AQ {:.3}  STQ {:.3}", corrected.aq, corrected.stq);
    println!("flawed    AQ {:.3}  STQ {:.3}", flawed.aq, flawed.stq);
    Ok(())
}
