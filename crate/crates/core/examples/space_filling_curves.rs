//! Serialize sampled seed points along Morton and Hilbert curves, then merge
//! two point streams, window them jointly and split the result back.
//!
//!     cargo run --example space_filling_curves

use pot4d::grid::GridGeometry;
use pot4d::serialization::{
    curve_code, seed_points, serialize, smsa_regroup, windows, Curve, PointStream,
};
use pot4d::splat::{splat, Gaussian, GaussianSet};

fn main() -> pot4d::Result<()> {
    let geom = GridGeometry::unit([16, 16, 4])?;
    let set = GaussianSet::new(
        vec![
            Gaussian::isotropic([4.0, 4.0, 2.0], 1.5, 0.9, vec![1.0, 0.0]),
            Gaussian::isotropic([11.0, 10.0, 2.0], 2.0, 0.7, vec![0.0, 1.0]),
        ],
        2,
    )?;
    let features = splat(&set, &geom, 3.0)?;

    // seeds drawn with probability proportional to feature norm
    let coarse = seed_points(&features, 24, 1)?;
    let mut fine = seed_points(&features, 64, 2)?;
    fine.stream_id = 1;

    for curve in [Curve::Morton, Curve::Hilbert] {
        let order = serialize(&coarse, curve);
        let first: Vec<_> = order.apply(&coarse.indices).into_iter().take(6).collect();
        println!("{curve:?} order starts {first:?}");
        println!("  windows of 8: {}", windows(&order, 8)?.len());
    }
    println!("hilbert code of [3, 5, 1] at 4 bits: {}", curve_code(Curve::Hilbert, [3, 5, 1], 4)?);

    let streams = [coarse, fine];
    let joint = smsa_regroup(&streams, Curve::Hilbert, 16)?;
    let from: Vec<usize> = joint.windows[0].clone().map(|i| joint.origins[i].stream).collect();
    println!("first joint window mixes streams {from:?}");

    // per-point work happens in unified order; split it back per stream
    let merged = joint.merged_indices(&streams);
    let payload = joint.merged_payload(&streams);
    let back: Vec<PointStream> = joint.split_streams(&merged, &payload)?;
    assert_eq!(back, streams);
    println!("split back {} + {} points", back[0].len(), back[1].len());
    Ok(())
}
