//! Turn per-query class scores and masks into a panoptic voxel grid, with
//! split and unified aggregation.
//!
//!     cargo run --example mask_aggregation

use pot4d::grid::{GridGeometry, LabelSpec};
use pot4d::infer::{aggregate, Aggregation, InferenceParams, QueryKind, QueryOutput};

fn main() -> pot4d::Result<()> {
    let spec = LabelSpec::new(
        vec!["free".into(), "road".into(), "car".into()],
        vec![false, false, true],
        0,
        None,
    )?;
    let geom = GridGeometry::unit([3, 1, 1])?;

    // query 0: road stuff, score 0.9
    // query 1: car instance with track ID 5, score 0.6
    let out = QueryOutput::new(
        [3, 1, 1],
        3,
        vec![0.0, 0.9, 0.1, 0.0, 0.2, 0.6],
        vec![QueryKind::Stuff, QueryKind::Instance],
        vec![0, 5],
        // masks; at voxel 1 the voxel scores are 0.36 (road) and 0.30 (car)
        vec![0.9, 0.4, 0.1, 0.1, 0.5, 0.2],
    )?;

    for mode in [Aggregation::Split, Aggregation::Unified] {
        let params = InferenceParams {
            mode,
            ..Default::default()
        };
        let grid = aggregate(&out, &geom, &spec, &params)?;
        println!(
            "{mode:?}: classes {:?} instances {:?}",
            grid.semantics(),
            grid.instances()
        );
    }
    Ok(())
}
