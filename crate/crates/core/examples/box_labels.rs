//! Give thing voxels instance IDs from oriented box annotations.
//!
//!     cargo run --example box_labels

use pot4d::grid::{GridGeometry, LabelSpec, PanopticGrid, TrackedSequence};
use pot4d::labelgen::{assign_instances, point_in_box, BoxAnnotation, LabelParams};

fn main() -> pot4d::Result<()> {
    let spec = LabelSpec::new(
        vec!["free".into(), "car".into()],
        vec![false, true],
        0,
        None,
    )?;
    let geom = GridGeometry::new([0.0; 3], [0.5; 3], [12, 6, 1])?;

    // two touching cars, plus one stray car voxel outside both boxes
    let mut frame = PanopticGrid::filled(geom, 0);
    for x in 1..10 {
        for y in 2..4 {
            frame.set(geom.linear([x, y, 0]), 1, 0);
        }
    }
    frame.set(geom.linear([11, 5, 0]), 1, 0);
    let semantic = TrackedSequence::from_frames(spec, geom, vec![frame])?;

    let boxes = vec![
        BoxAnnotation {
            timestep: 0,
            instance_id: 4,
            class: 1,
            center: [1.5, 1.5, 0.25],
            size: [2.2, 1.2, 1.0],
            yaw: 0.0,
        },
        BoxAnnotation {
            timestep: 0,
            instance_id: 9,
            class: 1,
            center: [3.75, 1.5, 0.25],
            size: [2.0, 1.2, 1.0],
            yaw: 0.1,
        },
    ];
    println!("voxel center (1.25, 1.25) in box 4: {}", point_in_box([1.25, 1.25, 0.25], &boxes[0]));

    for max_distance in [f64::INFINITY, 1.0] {
        let params = LabelParams {
            max_distance,
            ..Default::default()
        };
        let outcome = assign_instances(&semantic, &boxes, &params)?;
        let row: Vec<u32> = (0..12)
            .map(|x| outcome.sequence.frames()[0].instances()[geom.linear([x, 2, 0])])
            .collect();
        println!("max distance {max_distance}: row y=2 {row:?}, unassigned {}", outcome.unassigned);
    }
    Ok(())
}
