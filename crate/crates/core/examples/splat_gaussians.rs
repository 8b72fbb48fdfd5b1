//! Splat a few latent Gaussians onto a voxel grid and compare the truncated
//! kernel with dense evaluation.
//!
//!     cargo run --example splat_gaussians

use pot4d::grid::GridGeometry;
use pot4d::splat::{occupancy_at, splat, Gaussian, GaussianSet};

fn main() -> pot4d::Result<()> {
    let geom = GridGeometry::new([0.0; 3], [0.25; 3], [32, 32, 8])?;
    let mut stretched = Gaussian::isotropic([5.0, 2.0, 1.0], 0.3, 0.6, vec![0.0, 1.0, 0.5]);
    stretched.scale = [0.8, 0.2, 0.3];
    // 30 degrees about z
    let h = 15f64.to_radians();
    stretched.rotation = [h.cos(), 0.0, 0.0, h.sin()];
    let set = GaussianSet::new(
        vec![
            Gaussian::isotropic([2.0, 2.0, 1.0], 0.4, 0.9, vec![1.0, 0.0, 0.0]),
            Gaussian::isotropic([2.6, 2.2, 1.0], 0.3, 0.5, vec![0.0, 0.0, 1.0]),
            stretched,
        ],
        3,
    )?;

    // at a lone Gaussian's center occupancy is exactly its opacity
    let lone = GaussianSet::new(vec![set.gaussians()[0].clone()], 3)?;
    println!("occupancy at center: {:.6}", occupancy_at(&lone, [2.0, 2.0, 1.0]));

    let dense = splat(&set, &geom, f64::INFINITY)?;
    for sigma in [2.0, 3.0, 4.0, 5.0] {
        let cut = splat(&set, &geom, sigma)?;
        let (d_occ, d_feat) = cut.max_abs_diff(&dense)?;
        println!("truncation {sigma}σ: max |Δocc| {d_occ:.2e}, max |Δfeat| {d_feat:.2e}");
    }

    let v = geom.point_to_index([2.1, 2.1, 1.1]).expect("inside grid");
    let v = geom.linear(v);
    println!("voxel {v}: occupancy {:.4}, feature {:?}", dense.occupancy()[v], dense.feature(v));
    Ok(())
}
