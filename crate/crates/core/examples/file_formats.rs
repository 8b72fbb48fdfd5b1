//! Write and read back the binary sequence, Gaussian and feature-grid files.
//!
//!     cargo run --example file_formats

use pot4d::io::{decode_fgrd, decode_gset, decode_ov4d, encode_fgrd, encode_gset, encode_ov4d};
use pot4d::sim::{render, SceneScript};
use pot4d::splat::{splat, Gaussian, GaussianSet};

const SCENE: &str = include_str!("../fixtures/default_scene.toml");

fn main() -> pot4d::Result<()> {
    let gt = render(&SceneScript::from_toml(SCENE, "default_scene.toml")?)?.ground_truth;
    let bytes = encode_ov4d(&gt);
    println!("OV4D: {} bytes for {} frames", bytes.len(), gt.len());
    assert_eq!(decode_ov4d(&bytes, "memory")?, gt);

    // truncated files name the shortfall
    if let Err(e) = decode_ov4d(&bytes[..bytes.len() / 2], "half.ov4d") {
        println!("{e} (exit code {})", e.exit_code());
    }

    let set = GaussianSet::new(vec![Gaussian::isotropic([4.0, 4.0, 2.0], 1.0, 0.8, vec![0.5, 0.25])], 2)?;
    let gset = encode_gset(&set);
    println!("GSET: {} bytes", gset.len());
    let back = decode_gset(&gset, "memory")?;

    let grid = splat(&back, gt.geometry(), 3.0)?;
    let fgrd = encode_fgrd(&grid);
    println!("FGRD: {} bytes", fgrd.len());
    decode_fgrd(&fgrd, "memory")?;
    Ok(())
}
