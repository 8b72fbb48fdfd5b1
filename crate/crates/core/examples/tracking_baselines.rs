//! Run the four tracking baselines on a rendered scene whose instance IDs
//! were scrambled per frame, and score each against ground truth.
//!
//!     cargo run --example tracking_baselines

use std::collections::BTreeMap;

use pot4d::metrics::stq_report;
use pot4d::sim::{render, SceneScript};
use pot4d::track::{per_frame, track, FrameInstances, TrackMethod, TrackerParams};

const SCENE: &str = include_str!("../fixtures/default_scene.toml");

fn main() -> pot4d::Result<()> {
    let gt = render(&SceneScript::from_toml(SCENE, "default_scene.toml")?)?.ground_truth;
    let detections = per_frame(&gt);

    // identity-revealing embeddings: one-hot on the ground-truth ID
    let embeddings: Vec<BTreeMap<u32, Vec<f64>>> = gt
        .frames()
        .iter()
        .zip(detections.frames())
        .map(|(g, d)| {
            FrameInstances::extract(d, None)
                .instances
                .iter()
                .map(|inst| {
                    let truth = g.instances()[inst.voxels[0] as usize] as usize;
                    let mut e = vec![0.0; 16];
                    e[truth % 16] = 1.0;
                    (inst.id, e)
                })
                .collect()
        })
        .collect();

    let params = TrackerParams::default();
    for method in [TrackMethod::PerFrame, TrackMethod::Iou, TrackMethod::Cosine, TrackMethod::Ab3dmot] {
        let tracked = track(&detections, method, &params, Some(&embeddings))?;
        let r = stq_report(&gt, &tracked, false)?;
        println!("{method:?}: AQ {:.3} AQ1 {:.3} STQ {:.3}", r.aq, r.aq1, r.stq);
    }
    Ok(())
}
