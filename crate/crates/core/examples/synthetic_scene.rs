//! Render the default scene script and show how each corruption moves the
//! metrics.
//!
//!     cargo run --example synthetic_scene

use pot4d::metrics::stq_report;
use pot4d::sim::{corrupt, render, CorruptOp, SceneScript};

const SCENE: &str = include_str!("../fixtures/default_scene.toml");

fn main() -> pot4d::Result<()> {
    let script = SceneScript::from_toml(SCENE, "default_scene.toml")?;
    let rendered = render(&script)?;
    let gt = &rendered.ground_truth;
    println!(
        "{} frames of {:?}, {} boxes, {} violations",
        gt.len(),
        gt.geometry().dims,
        rendered.boxes.len(),
        gt.validate().len()
    );

    println!("{:<14} {:>7} {:>7} {:>7} {:>7} {:>9}", "corruption", "AQ", "AQ1", "binIoU", "mIoUst", "flawedAQ");
    for op in [
        CorruptOp::IdSwitch { frame: 2 },
        CorruptOp::DropFrame { frame: 2 },
        CorruptOp::JitterMask { frame: 2 },
        CorruptOp::SpawnFp { frame: 2 },
    ] {
        let pred = corrupt(gt, &[op], 5)?;
        let r = stq_report(gt, &pred, false)?;
        let f = stq_report(gt, &pred, true)?;
        println!(
            "{:<14} {:>7.4} {:>7.4} {:>7.4} {:>7.4} {:>9.4}",
            op.to_string(),
            r.aq,
            r.aq1,
            r.binary_iou,
            r.miou_stuff,
            f.aq
        );
    }

    // scripts can be generated too
    let random = SceneScript::random(*gt.geometry(), gt.spec().clone(), 4, 6, 42)?;
    println!("random scene: {} objects", random.objects.len());
    Ok(())
}
