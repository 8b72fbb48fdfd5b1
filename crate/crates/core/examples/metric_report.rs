//! Full metric report for a rendered scene against a corrupted copy.
//!
//!     cargo run --example metric_report

use pot4d::metrics::{parse_text_map, stq_report};
use pot4d::sim::{corrupt, parse_ops, render, SceneScript};

const SCENE: &str = include_str!("../fixtures/default_scene.toml");

fn main() -> pot4d::Result<()> {
    let script = SceneScript::from_toml(SCENE, "default_scene.toml")?;
    let gt = render(&script)?.ground_truth;
    let pred = corrupt(&gt, &parse_ops("id_switch:2,jitter_mask:4")?, 11)?;

    let report = stq_report(&gt, &pred, false)?;
    let text = report.to_text_map();
    for line in text.lines().filter(|l| !l.starts_with("confusion.")) {
        println!("{line}");
    }

    // the text map parses back without loss
    let parsed = parse_text_map(&text)?;
    assert_eq!(parsed["aq"], report.aq);
    Ok(())
}
