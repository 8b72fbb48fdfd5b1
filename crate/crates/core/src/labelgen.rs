//! Instance ground truth from semantic occupancy plus 3D box annotations.
//!
//! Each thing-class voxel takes the ID of the same-class box containing its
//! center. Voxels inside several boxes, or inside none, go to the same-class
//! box whose center is nearest.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{TrackedSequence, NO_INSTANCE};

/// Oriented box around one object at one timestep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxAnnotation {
    pub timestep: i64,
    pub instance_id: u32,
    pub class: u16,
    pub center: [f64; 3],
    /// (length along heading, width, height)
    pub size: [f64; 3],
    /// Heading about +z, radians.
    pub yaw: f64,
}

impl BoxAnnotation {
    pub fn check(&self) -> Result<()> {
        if self.instance_id == NO_INSTANCE {
            return Err(Error::Argument("box instance ID must be nonzero".into()));
        }
        if self.size.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::Argument(format!("box size {:?} must be positive", self.size)));
        }
        if self.center.iter().chain([&self.yaw]).any(|v| !v.is_finite()) {
            return Err(Error::Numeric("box center or yaw not finite".into()));
        }
        Ok(())
    }
}

pub fn point_in_box(p: [f64; 3], b: &BoxAnnotation) -> bool {
    point_in_box_margin(p, b, 0.0)
}

/// Containment test with every half-extent grown by `margin`.
pub fn point_in_box_margin(p: [f64; 3], b: &BoxAnnotation, margin: f64) -> bool {
    let dx = p[0] - b.center[0];
    let dy = p[1] - b.center[1];
    let dz = p[2] - b.center[2];
    let (s, c) = b.yaw.sin_cos();
    // rotate by -yaw
    let lx = c * dx + s * dy;
    let ly = -s * dx + c * dy;
    lx.abs() <= b.size[0] / 2.0 + margin
        && ly.abs() <= b.size[1] / 2.0 + margin
        && dz.abs() <= b.size[2] / 2.0 + margin
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LabelParams {
    /// Growth of every box half-extent before containment tests, meters.
    pub margin: f64,
    /// Upper bound on the voxel-to-box-center distance of a nearest-box
    /// fallback, meters.
    pub max_distance: f64,
}

impl Default for LabelParams {
    fn default() -> Self {
        Self {
            margin: 0.0,
            max_distance: f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelOutcome {
    pub sequence: TrackedSequence,
    /// Thing voxels left without an instance: no same-class box in their
    /// frame, or the nearest one beyond `max_distance`.
    pub unassigned: u64,
}

fn distance_sq(a: [f64; 3], b: [f64; 3]) -> f64 {
    (0..3).map(|k| (a[k] - b[k]).powi(2)).sum()
}

/// Assigns instance IDs to every thing voxel of `semantic`; stuff and free
/// voxels get no instance. Existing instance IDs are ignored, so the
/// operation is idempotent.
pub fn assign_instances(
    semantic: &TrackedSequence,
    boxes: &[BoxAnnotation],
    params: &LabelParams,
) -> Result<LabelOutcome> {
    let spec = semantic.spec();
    for b in boxes {
        b.check()?;
        if !spec.is_thing(b.class) {
            return Err(Error::Argument(format!(
                "box {} has non-thing class {}",
                b.instance_id, b.class
            )));
        }
    }
    let geom = *semantic.geometry();
    let mut out = semantic.clone();
    let mut unassigned = 0u64;
    let max_d2 = params.max_distance * params.max_distance;

    for (frame, &ts) in out.frames.iter_mut().zip(semantic.timestamps()) {
        let here: Vec<&BoxAnnotation> = boxes.iter().filter(|b| b.timestep == ts).collect();
        for v in 0..frame.len() {
            let class = frame.semantics[v];
            if !spec.is_thing(class) {
                frame.instances[v] = NO_INSTANCE;
                continue;
            }
            let p = geom.linear_center(v);
            // nearest containing box, else nearest same-class box; ties to the
            // lowest instance ID
            let mut best: Option<(bool, f64, u32)> = None;
            for b in here.iter().filter(|b| b.class == class) {
                let inside = point_in_box_margin(p, b, params.margin);
                let cand = (inside, distance_sq(p, b.center), b.instance_id);
                let better = match best {
                    None => true,
                    Some((bi, bd, bid)) => {
                        (inside && !bi)
                            || (inside == bi && (cand.1 < bd || (cand.1 == bd && cand.2 < bid)))
                    }
                };
                if better {
                    best = Some(cand);
                }
            }
            frame.instances[v] = match best {
                Some((true, _, id)) => id,
                Some((false, d2, id)) if d2 <= max_d2 => id,
                _ => {
                    unassigned += 1;
                    NO_INSTANCE
                }
            };
        }
    }
    if unassigned > 0 {
        log::warn!("{unassigned} thing voxels left without an instance");
    }
    Ok(LabelOutcome {
        sequence: out,
        unassigned,
    })
}

/// Reads one JSON box record per line; blank lines and `#` comments skipped.
pub fn read_boxes(reader: impl BufRead, path: &str) -> Result<Vec<BoxAnnotation>> {
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let b: BoxAnnotation = serde_json::from_str(t).map_err(|e| Error::Parse {
            path: path.to_string(),
            message: format!("line {}: {e}", n + 1),
        })?;
        out.push(b);
    }
    Ok(out)
}

pub fn write_boxes(mut writer: impl Write, boxes: &[BoxAnnotation], path: &str) -> Result<()> {
    for b in boxes {
        let line = serde_json::to_string(b).expect("box records always serialize");
        writeln!(writer, "{line}").map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}
