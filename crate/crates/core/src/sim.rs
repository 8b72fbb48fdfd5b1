//! Deterministic synthetic 4D scenes and prediction corruptions.
//!
//! Scene scripts are TOML. See `fixtures/default_scene.toml` for a
//! commented example.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridGeometry, LabelSpec, PanopticGrid, TrackedSequence, NO_INSTANCE};
use crate::labelgen::{assign_instances, point_in_box, BoxAnnotation, LabelParams};

/// Center and heading of an object at one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub center: [f64; 3],
    #[serde(default)]
    pub yaw: f64,
}

/// Constant-velocity motion, expanded into one pose per frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Motion {
    pub center: [f64; 3],
    #[serde(default)]
    pub velocity: [f64; 3],
    #[serde(default)]
    pub yaw: f64,
    #[serde(default)]
    pub yaw_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub class: u16,
    /// Defaults to the object's position in the script plus one.
    #[serde(default)]
    pub instance_id: Option<u32>,
    /// Box extent (length, width, height), meters.
    pub size: [f64; 3],
    /// First frame the object exists in.
    #[serde(default)]
    pub start_frame: usize,
    /// One pose per frame from `start_frame` on; takes precedence over
    /// `motion`.
    #[serde(default)]
    pub trajectory: Vec<Pose>,
    #[serde(default)]
    pub motion: Option<Motion>,
    /// Last frame (exclusive) for `motion`; defaults to the scene length.
    #[serde(default)]
    pub end_frame: Option<usize>,
}

impl SceneObject {
    fn pose(&self, frame: usize, frames: usize) -> Option<Pose> {
        if frame < self.start_frame {
            return None;
        }
        let k = frame - self.start_frame;
        if !self.trajectory.is_empty() {
            return self.trajectory.get(k).copied();
        }
        let m = self.motion?;
        if frame >= self.end_frame.unwrap_or(frames) {
            return None;
        }
        let t = k as f64;
        Some(Pose {
            center: std::array::from_fn(|i| m.center[i] + t * m.velocity[i]),
            yaw: m.yaw + t * m.yaw_rate,
        })
    }
}

/// Axis-aligned stuff region in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StuffRegion {
    pub class: u16,
    pub min: [f64; 3],
    pub max: [f64; 3],
}

/// Horizontal sensor frustum; voxels outside it are invisible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Frustum {
    pub sensor: [f64; 3],
    pub heading_deg: f64,
    pub fov_deg: f64,
    pub max_range: f64,
}

impl Frustum {
    pub fn sees(&self, p: [f64; 3]) -> bool {
        let dx = p[0] - self.sensor[0];
        let dy = p[1] - self.sensor[1];
        let range = (dx * dx + dy * dy).sqrt();
        if range > self.max_range {
            return false;
        }
        if range == 0.0 {
            return true;
        }
        let bearing = dy.atan2(dx).to_degrees();
        let mut off = (bearing - self.heading_deg) % 360.0;
        if off > 180.0 {
            off -= 360.0;
        } else if off < -180.0 {
            off += 360.0;
        }
        off.abs() <= self.fov_deg / 2.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneScript {
    pub frames: usize,
    #[serde(default)]
    pub seed: u64,
    pub geometry: GridGeometry,
    pub labels: LabelSpec,
    #[serde(default)]
    pub stuff: Vec<StuffRegion>,
    #[serde(default)]
    pub objects: Vec<SceneObject>,
    #[serde(default)]
    pub visibility: Option<Frustum>,
}

impl SceneScript {
    pub fn from_toml(text: &str, path: &str) -> Result<Self> {
        let script: SceneScript = toml::from_str(text).map_err(|e| Error::Parse {
            path: path.to_string(),
            message: e.to_string(),
        })?;
        script.check()?;
        Ok(script)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scene scripts always serialize")
    }

    pub fn check(&self) -> Result<()> {
        self.labels.check()?;
        GridGeometry::new(self.geometry.origin, self.geometry.voxel_size, self.geometry.dims)?;
        for (k, o) in self.objects.iter().enumerate() {
            if !self.labels.is_thing(o.class) {
                return Err(Error::Argument(format!("object {k} has non-thing class {}", o.class)));
            }
            if o.size.iter().any(|&s| !(s > 0.0)) {
                return Err(Error::Argument(format!("object {k} size must be positive")));
            }
            if o.trajectory.is_empty() && o.motion.is_none() {
                return Err(Error::Argument(format!("object {k} has neither trajectory nor motion")));
            }
            if o.instance_id == Some(NO_INSTANCE) {
                return Err(Error::Argument(format!("object {k} uses reserved instance ID 0")));
            }
        }
        let mut ids = BTreeSet::new();
        for k in 0..self.objects.len() {
            if !ids.insert(self.instance_id(k)) {
                return Err(Error::Argument(format!("duplicate instance ID {}", self.instance_id(k))));
            }
        }
        for (k, s) in self.stuff.iter().enumerate() {
            if !self.labels.is_stuff(s.class) {
                return Err(Error::Argument(format!("stuff region {k} has class {}", s.class)));
            }
        }
        Ok(())
    }

    fn instance_id(&self, k: usize) -> u32 {
        self.objects[k].instance_id.unwrap_or(k as u32 + 1)
    }

    /// Every box annotation of the scene, frame-major, object order within a
    /// frame.
    pub fn boxes(&self) -> Vec<BoxAnnotation> {
        let mut out = Vec::new();
        for t in 0..self.frames {
            for (k, o) in self.objects.iter().enumerate() {
                if let Some(p) = o.pose(t, self.frames) {
                    out.push(BoxAnnotation {
                        timestep: t as i64,
                        instance_id: self.instance_id(k),
                        class: o.class,
                        center: p.center,
                        size: o.size,
                        yaw: p.yaw,
                    });
                }
            }
        }
        out
    }

    /// Random scene: `objects` boxes drifting across a ground-plane stuff
    /// layer. Classes are drawn from the spec's thing and stuff classes.
    pub fn random(
        geometry: GridGeometry,
        labels: LabelSpec,
        frames: usize,
        objects: usize,
        seed: u64,
    ) -> Result<Self> {
        let things: Vec<u16> = (0..labels.num_classes() as u16).filter(|&c| labels.is_thing(c)).collect();
        let stuffs: Vec<u16> = (0..labels.num_classes() as u16).filter(|&c| labels.is_stuff(c)).collect();
        if things.is_empty() && objects > 0 {
            return Err(Error::Argument("label spec has no thing classes".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lo = geometry.origin;
        let ext: [f64; 3] = std::array::from_fn(|k| geometry.dims[k] as f64 * geometry.voxel_size[k]);
        let vs = geometry.voxel_size;
        let mut stuff = Vec::new();
        if let Some(&c) = stuffs.first() {
            stuff.push(StuffRegion {
                class: c,
                min: lo,
                max: [lo[0] + ext[0], lo[1] + ext[1], lo[2] + vs[2]],
            });
        }
        if let Some(&c) = stuffs.get(1) {
            stuff.push(StuffRegion {
                class: c,
                min: [lo[0], lo[1], lo[2] + vs[2]],
                max: [lo[0] + ext[0] / 4.0, lo[1] + ext[1], lo[2] + 3.0 * vs[2]],
            });
        }
        let objects = (0..objects)
            .map(|_| {
                let size: [f64; 3] = std::array::from_fn(|k| vs[k] * rng.gen_range(1.0..4.0));
                let center: [f64; 3] = [
                    lo[0] + rng.gen_range(0.1..0.9) * ext[0],
                    lo[1] + rng.gen_range(0.1..0.9) * ext[1],
                    lo[2] + vs[2] + size[2] / 2.0,
                ];
                SceneObject {
                    class: *things.choose(&mut rng).expect("nonempty"),
                    instance_id: None,
                    size,
                    start_frame: 0,
                    trajectory: Vec::new(),
                    motion: Some(Motion {
                        center,
                        velocity: [rng.gen_range(-1.0..1.0) * vs[0], rng.gen_range(-1.0..1.0) * vs[1], 0.0],
                        yaw: rng.gen_range(-3.1..3.1),
                        yaw_rate: 0.0,
                    }),
                    end_frame: None,
                }
            })
            .collect();
        let script = Self {
            frames,
            seed,
            geometry,
            labels,
            stuff,
            objects,
            visibility: None,
        };
        script.check()?;
        Ok(script)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rendered {
    pub ground_truth: TrackedSequence,
    pub boxes: Vec<BoxAnnotation>,
}

/// Paints stuff regions, then object boxes in script order (a later object
/// overwrites an earlier one where they overlap), and labels instances with
/// [`assign_instances`] on the scene's own boxes.
pub fn render(script: &SceneScript) -> Result<Rendered> {
    script.check()?;
    let geom = GridGeometry::new(script.geometry.origin, script.geometry.voxel_size, script.geometry.dims)?;
    let boxes = script.boxes();
    let n = geom.num_voxels();
    let centers: Vec<[f64; 3]> = (0..n).map(|v| geom.linear_center(v)).collect();
    let visibility: Vec<bool> = match &script.visibility {
        Some(f) => centers.iter().map(|&c| f.sees(c)).collect(),
        None => vec![true; n],
    };

    let mut frames = Vec::with_capacity(script.frames);
    for t in 0..script.frames {
        let mut grid = PanopticGrid::filled(geom, script.labels.free_class);
        grid.visibility.clone_from(&visibility);
        for s in &script.stuff {
            for (v, c) in centers.iter().enumerate() {
                if (0..3).all(|k| s.min[k] <= c[k] && c[k] < s.max[k]) {
                    grid.semantics[v] = s.class;
                }
            }
        }
        for b in boxes.iter().filter(|b| b.timestep == t as i64) {
            let Some((lo, hi)) = box_index_range(&geom, b) else {
                continue;
            };
            for z in lo[2]..=hi[2] {
                for y in lo[1]..=hi[1] {
                    for x in lo[0]..=hi[0] {
                        let v = geom.linear([x, y, z]);
                        if point_in_box(centers[v], b) {
                            grid.semantics[v] = b.class;
                        }
                    }
                }
            }
        }
        frames.push(grid);
    }
    let semantic = TrackedSequence::from_frames(script.labels.clone(), geom, frames)?;
    let labelled = assign_instances(&semantic, &boxes, &LabelParams::default())?;
    Ok(Rendered {
        ground_truth: labelled.sequence,
        boxes,
    })
}

/// Voxel index bounds of the axis-aligned hull of `b`, clipped to the grid.
fn box_index_range(geom: &GridGeometry, b: &BoxAnnotation) -> Option<([u32; 3], [u32; 3])> {
    let half_xy = 0.5 * (b.size[0].hypot(b.size[1]));
    let half = [half_xy, half_xy, 0.5 * b.size[2]];
    let mut lo = [0u32; 3];
    let mut hi = [0u32; 3];
    for k in 0..3 {
        let a = ((b.center[k] - half[k] - geom.origin[k]) / geom.voxel_size[k]).floor().max(0.0);
        let z = ((b.center[k] + half[k] - geom.origin[k]) / geom.voxel_size[k])
            .floor()
            .min(geom.dims[k] as f64 - 1.0);
        if a > z {
            return None;
        }
        lo[k] = a as u32;
        hi[k] = z as u32;
    }
    Some((lo, hi))
}

/// One corruption applied to a prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorruptOp {
    /// Swap two instance IDs from `frame` onward.
    IdSwitch { frame: usize },
    /// Erase one instance (to free space) in `frame`.
    DropFrame { frame: usize },
    /// Toggle boundary voxels of the instances in `frame`: boundary voxels
    /// become free, free neighbours join the instance.
    JitterMask { frame: usize },
    /// Extend one instance of `frame` with a blob in visible free space.
    SpawnFp { frame: usize },
}

impl CorruptOp {
    pub fn frame(&self) -> usize {
        match *self {
            CorruptOp::IdSwitch { frame }
            | CorruptOp::DropFrame { frame }
            | CorruptOp::JitterMask { frame }
            | CorruptOp::SpawnFp { frame } => frame,
        }
    }
}

impl fmt::Display for CorruptOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            CorruptOp::IdSwitch { .. } => "id_switch",
            CorruptOp::DropFrame { .. } => "drop_frame",
            CorruptOp::JitterMask { .. } => "jitter_mask",
            CorruptOp::SpawnFp { .. } => "spawn_fp",
        };
        write!(f, "{name}:{}", self.frame())
    }
}

impl FromStr for CorruptOp {
    type Err = Error;

    /// `name` or `name:frame`, e.g. `id_switch:2`. Frame defaults to 0.
    fn from_str(s: &str) -> Result<Self> {
        let (name, frame) = match s.trim().split_once(':') {
            Some((n, f)) => (
                n,
                f.parse::<usize>()
                    .map_err(|_| Error::Argument(format!("bad frame in corruption {s:?}")))?,
            ),
            None => (s.trim(), 0),
        };
        match name {
            "id_switch" => Ok(CorruptOp::IdSwitch { frame }),
            "drop_frame" => Ok(CorruptOp::DropFrame { frame }),
            "jitter_mask" => Ok(CorruptOp::JitterMask { frame }),
            "spawn_fp" => Ok(CorruptOp::SpawnFp { frame }),
            other => Err(Error::Argument(format!("unknown corruption {other:?}"))),
        }
    }
}

/// Comma-separated list of corruptions.
pub fn parse_ops(s: &str) -> Result<Vec<CorruptOp>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(str::parse)
        .collect()
}

fn instance_ids(grid: &PanopticGrid) -> Vec<u32> {
    let set: BTreeSet<u32> = grid.instances.iter().copied().filter(|&i| i != NO_INSTANCE).collect();
    set.into_iter().collect()
}

fn neighbours(geom: &GridGeometry, v: usize) -> impl Iterator<Item = usize> + '_ {
    let p = geom.unlinear(v).map(i64::from);
    const STEPS: [[i64; 3]; 6] = [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]];
    STEPS.into_iter().filter_map(move |d| {
        let q = [p[0] + d[0], p[1] + d[1], p[2] + d[2]];
        geom.contains(q)
            .then(|| geom.linear([q[0] as u32, q[1] as u32, q[2] as u32]))
    })
}

fn frame_of<'a>(seq: &'a mut TrackedSequence, op: &CorruptOp) -> Result<&'a mut PanopticGrid> {
    let n = seq.len();
    seq.frames
        .get_mut(op.frame())
        .ok_or_else(|| Error::Argument(format!("{op}: sequence has {n} frames")))
}

/// Applies `ops` in order. Random choices (which instances, which voxels)
/// come from one generator seeded with `seed`.
pub fn corrupt(seq: &TrackedSequence, ops: &[CorruptOp], seed: u64) -> Result<TrackedSequence> {
    let mut out = seq.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = seq.spec().clone();
    let free = spec.free_class;
    let geom = *seq.geometry();

    for op in ops {
        match *op {
            CorruptOp::IdSwitch { frame } => {
                let ids = instance_ids(frame_of(&mut out, op)?);
                if ids.len() < 2 {
                    return Err(Error::Argument(format!("{op}: needs two instances in the frame")));
                }
                let pair: Vec<u32> = ids.choose_multiple(&mut rng, 2).copied().collect();
                let (a, b) = (pair[0], pair[1]);
                for f in out.frames.iter_mut().skip(frame) {
                    for id in f.instances.iter_mut() {
                        if *id == a {
                            *id = b;
                        } else if *id == b {
                            *id = a;
                        }
                    }
                }
            }
            CorruptOp::DropFrame { .. } => {
                let f = frame_of(&mut out, op)?;
                let ids = instance_ids(f);
                let &victim = ids
                    .choose(&mut rng)
                    .ok_or_else(|| Error::Argument(format!("{op}: no instance in the frame")))?;
                for v in 0..f.len() {
                    if f.instances[v] == victim {
                        f.set(v, free, NO_INSTANCE);
                    }
                }
            }
            CorruptOp::JitterMask { .. } => {
                let f = frame_of(&mut out, op)?;
                let before = f.clone();
                let mut toggled = 0usize;
                for v in 0..before.len() {
                    let id = before.instances[v];
                    if id == NO_INSTANCE || !rng.gen_bool(0.5) {
                        continue;
                    }
                    let boundary: Vec<usize> = neighbours(&geom, v)
                        .filter(|&u| before.semantics[u] == free)
                        .collect();
                    if boundary.is_empty() {
                        continue;
                    }
                    // shrink here, grow into one free neighbour
                    f.set(v, free, NO_INSTANCE);
                    let &u = boundary.choose(&mut rng).expect("nonempty");
                    if f.semantics[u] == free {
                        f.set(u, before.semantics[v], id);
                    }
                    toggled += 1;
                }
                if toggled == 0 {
                    return Err(Error::Argument(format!("{op}: no instance touches free space")));
                }
            }
            CorruptOp::SpawnFp { .. } => {
                let f = frame_of(&mut out, op)?;
                let gt_frame = &seq.frames[op.frame()];
                let ids = instance_ids(f);
                let &host = ids
                    .choose(&mut rng)
                    .ok_or_else(|| Error::Argument(format!("{op}: no instance to extend")))?;
                let class = f
                    .instances
                    .iter()
                    .position(|&i| i == host)
                    .map(|v| f.semantics[v])
                    .expect("host present");
                // visible voxels free in both the input and this frame, whose
                // whole 6-neighbourhood is free too
                let candidates: Vec<usize> = (0..f.len())
                    .filter(|&v| {
                        gt_frame.visibility[v]
                            && gt_frame.semantics[v] == free
                            && f.semantics[v] == free
                            && neighbours(&geom, v).all(|u| gt_frame.semantics[u] == free)
                    })
                    .collect();
                let &seed_voxel = candidates
                    .choose(&mut rng)
                    .ok_or_else(|| Error::Argument(format!("{op}: no visible free space")))?;
                let blob: Vec<usize> = std::iter::once(seed_voxel)
                    .chain(neighbours(&geom, seed_voxel))
                    .filter(|&u| gt_frame.visibility[u] && f.semantics[u] == free)
                    .collect();
                for u in blob {
                    f.set(u, class, host);
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::stq_report;

    fn labels() -> LabelSpec {
        LabelSpec::new(
            ["free", "road", "car"].map(String::from).to_vec(),
            vec![false, false, true],
            0,
            None,
        )
        .unwrap()
    }

    fn script(objects: Vec<SceneObject>, stuff: Vec<StuffRegion>, frames: usize) -> SceneScript {
        SceneScript {
            frames,
            seed: 0,
            geometry: GridGeometry::unit([8, 8, 2]).unwrap(),
            labels: labels(),
            stuff,
            objects,
            visibility: None,
        }
    }

    fn car(center: [f64; 3], size: [f64; 3]) -> SceneObject {
        SceneObject {
            class: 2,
            instance_id: None,
            size,
            start_frame: 0,
            trajectory: Vec::new(),
            motion: Some(Motion {
                center,
                velocity: [0.0; 3],
                yaw: 0.0,
                yaw_rate: 0.0,
            }),
            end_frame: None,
        }
    }

    #[test]
    fn empty_script_is_free() {
        let r = render(&script(vec![], vec![], 2)).unwrap();
        assert_eq!(r.ground_truth.len(), 2);
        assert!(r.ground_truth.frames().iter().all(|f| f.semantics().iter().all(|&c| c == 0)));
        assert!(r.boxes.is_empty());
    }

    #[test]
    fn static_two_by_two_object() {
        let r = render(&script(vec![car([2.0, 2.0, 0.5], [2.0, 2.0, 1.0])], vec![], 3)).unwrap();
        for f in r.ground_truth.frames() {
            assert_eq!(f.semantics().iter().filter(|&&c| c == 2).count(), 4);
            let ids: BTreeSet<u32> = f.instances().iter().copied().filter(|&i| i != 0).collect();
            assert_eq!(ids, BTreeSet::from([1]));
        }
        assert!(r.ground_truth.validate().is_empty());
    }

    #[test]
    fn object_overrides_stuff() {
        let road = StuffRegion {
            class: 1,
            min: [0.0; 3],
            max: [8.0, 8.0, 1.0],
        };
        let r = render(&script(vec![car([2.0, 2.0, 0.5], [2.0, 2.0, 1.0])], vec![road], 1)).unwrap();
        let f = &r.ground_truth.frames()[0];
        assert_eq!(f.semantics().iter().filter(|&&c| c == 2).count(), 4);
        assert_eq!(f.semantics().iter().filter(|&&c| c == 1).count(), 60);
    }

    #[test]
    fn frustum_carves_visibility() {
        let mut s = script(vec![], vec![], 1);
        s.visibility = Some(Frustum {
            sensor: [0.0, 4.0, 0.0],
            heading_deg: 0.0,
            fov_deg: 90.0,
            max_range: 100.0,
        });
        let r = render(&s).unwrap();
        let vis = r.ground_truth.frames()[0].visibility();
        assert!(vis.iter().any(|&v| v) && vis.iter().any(|&v| !v));
        let g = r.ground_truth.geometry();
        assert!(vis[g.linear([7, 4, 0])]);
        assert!(!vis[g.linear([0, 7, 0])]);
    }

    #[test]
    fn script_toml_roundtrip() {
        let s = script(vec![car([2.0, 2.0, 0.5], [2.0, 2.0, 1.0])], vec![], 3);
        let back = SceneScript::from_toml(&s.to_toml(), "mem").unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn ops_parse() {
        assert_eq!(
            parse_ops("id_switch:2, spawn_fp").unwrap(),
            vec![CorruptOp::IdSwitch { frame: 2 }, CorruptOp::SpawnFp { frame: 0 }]
        );
        assert!(parse_ops("teleport:1").is_err());
        assert!(parse_ops("drop_frame:x").is_err());
    }

    #[test]
    fn no_ops_is_identity() {
        let r = render(&script(vec![car([2.0, 2.0, 0.5], [2.0, 2.0, 1.0])], vec![], 2)).unwrap();
        assert_eq!(corrupt(&r.ground_truth, &[], 9).unwrap(), r.ground_truth);
    }

    #[test]
    fn spawn_fp_hits_corrected_aq_only() {
        let r = render(&script(vec![car([2.0, 2.0, 0.5], [2.0, 2.0, 1.0])], vec![], 2)).unwrap();
        let gt = &r.ground_truth;
        let pred = corrupt(gt, &[CorruptOp::SpawnFp { frame: 1 }], 3).unwrap();
        let c = stq_report(gt, &pred, false).unwrap();
        let f = stq_report(gt, &pred, true).unwrap();
        assert!(c.aq < 1.0);
        assert_eq!(f.aq, 1.0);
    }

    #[test]
    fn corruption_frame_out_of_range() {
        let r = render(&script(vec![car([2.0, 2.0, 0.5], [2.0, 2.0, 1.0])], vec![], 2)).unwrap();
        assert!(corrupt(&r.ground_truth, &[CorruptOp::DropFrame { frame: 5 }], 0).is_err());
        assert!(corrupt(&r.ground_truth, &[CorruptOp::IdSwitch { frame: 0 }], 0).is_err());
    }
}
