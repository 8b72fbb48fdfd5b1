//! Tracking-association baselines that turn per-frame instance predictions
//! into temporally consistent IDs.
//!
//! Every baseline only rewrites instance IDs; per-frame masks and classes are
//! never touched.

mod hungarian;
mod kalman;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use hungarian::{assignment_cost, hungarian};
pub use kalman::{kalman_track, KalmanParams, KalmanTracker, TrackState};

use crate::error::{Error, Result};
use crate::grid::{GridGeometry, PanopticGrid, TrackedSequence, NO_INSTANCE};

/// Axis-aligned box in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn from_center_size(center: [f64; 3], size: [f64; 3]) -> Self {
        Self {
            min: std::array::from_fn(|k| center[k] - size[k] / 2.0),
            max: std::array::from_fn(|k| center[k] + size[k] / 2.0),
        }
    }

    pub fn center(&self) -> [f64; 3] {
        std::array::from_fn(|k| 0.5 * (self.min[k] + self.max[k]))
    }

    pub fn size(&self) -> [f64; 3] {
        std::array::from_fn(|k| self.max[k] - self.min[k])
    }

    pub fn volume(&self) -> f64 {
        self.size().iter().map(|s| s.max(0.0)).product()
    }

    pub fn contains(&self, p: [f64; 3]) -> bool {
        (0..3).all(|k| self.min[k] <= p[k] && p[k] <= self.max[k])
    }

    pub fn iou(&self, other: &Aabb) -> f64 {
        let inter: f64 = (0..3)
            .map(|k| (self.max[k].min(other.max[k]) - self.min[k].max(other.min[k])).max(0.0))
            .product();
        let union = self.volume() + other.volume() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }
}

/// Tight box around the voxel centers, padded by half a voxel per side.
pub fn box_from_instance(voxels: &[u32], geom: &GridGeometry) -> Result<Aabb> {
    if voxels.is_empty() {
        return Err(Error::Argument("cannot box an empty voxel set".into()));
    }
    let mut min = [f64::INFINITY; 3];
    let mut max = [f64::NEG_INFINITY; 3];
    for &v in voxels {
        let c = geom.linear_center(v as usize);
        for k in 0..3 {
            min[k] = min[k].min(c[k]);
            max[k] = max[k].max(c[k]);
        }
    }
    for k in 0..3 {
        min[k] -= geom.voxel_size[k] / 2.0;
        max[k] += geom.voxel_size[k] / 2.0;
    }
    Ok(Aabb { min, max })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub id: u32,
    pub class: u16,
    /// Sorted linear voxel indices.
    pub voxels: Vec<u32>,
    pub embedding: Option<Vec<f64>>,
    pub bbox: Aabb,
}

/// Instances observed in one frame, sorted by ID.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameInstances {
    pub instances: Vec<Instance>,
}

impl FrameInstances {
    /// Collects the instances of `grid`. An instance's class is its most
    /// frequent voxel class (lowest on ties); embeddings are looked up by
    /// instance ID.
    pub fn extract(grid: &PanopticGrid, embeddings: Option<&BTreeMap<u32, Vec<f64>>>) -> Self {
        let mut voxels: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
        for (v, &id) in grid.instances().iter().enumerate() {
            if id != NO_INSTANCE {
                voxels.entry(id).or_default().push(v as u32);
            }
        }
        let instances = voxels
            .into_iter()
            .map(|(id, vox)| {
                let mut counts: BTreeMap<u16, usize> = BTreeMap::new();
                for &v in &vox {
                    *counts.entry(grid.semantics()[v as usize]).or_insert(0) += 1;
                }
                let class = counts
                    .iter()
                    .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
                    .map(|(&c, _)| c)
                    .unwrap_or(0);
                let bbox = box_from_instance(&vox, grid.geometry()).expect("nonempty");
                Instance {
                    id,
                    class,
                    voxels: vox,
                    embedding: embeddings.and_then(|e| e.get(&id).cloned()),
                    bbox,
                }
            })
            .collect();
        Self { instances }
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }
}

/// Hands out new track IDs, starting at 1.
#[derive(Debug, Clone)]
pub struct IdAllocator {
    next: u32,
}

impl Default for IdAllocator {
    fn default() -> Self {
        Self { next: 1 }
    }
}

impl IdAllocator {
    pub fn fresh(&mut self) -> u32 {
        let id = self.next;
        self.next += 1;
        id
    }
}

/// Current instance ID → assigned track ID.
pub type IdMapping = BTreeMap<u32, u32>;

fn voxel_iou(a: &[u32], b: &[u32]) -> f64 {
    let (mut i, mut j, mut inter) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

fn resolve(
    prev: &FrameInstances,
    cur: &FrameInstances,
    cost: &[Vec<f64>],
    ids: &mut IdAllocator,
) -> Result<IdMapping> {
    let pairs = hungarian(cost)?;
    let mut mapping = IdMapping::new();
    for (r, c) in pairs {
        mapping.insert(cur.instances[c].id, prev.instances[r].id);
    }
    for inst in &cur.instances {
        mapping.entry(inst.id).or_insert_with(|| ids.fresh());
    }
    Ok(mapping)
}

/// Hungarian matching on `1 - voxel IoU`. Pairs below `min_iou`, or without
/// any overlap, are never matched. `prev` must already carry track IDs.
pub fn iou_match(
    prev: &FrameInstances,
    cur: &FrameInstances,
    min_iou: f64,
    ids: &mut IdAllocator,
) -> Result<IdMapping> {
    let cost: Vec<Vec<f64>> = prev
        .instances
        .iter()
        .map(|p| {
            cur.instances
                .iter()
                .map(|c| {
                    let iou = voxel_iou(&p.voxels, &c.voxels);
                    if iou <= 0.0 || iou < min_iou {
                        f64::INFINITY
                    } else {
                        1.0 - iou
                    }
                })
                .collect()
        })
        .collect();
    resolve(prev, cur, &cost, ids)
}

/// Hungarian matching on `1 - cosine similarity` of instance embeddings;
/// class mismatches and similarities below `min_sim` are never matched.
pub fn cosine_match(
    prev: &FrameInstances,
    cur: &FrameInstances,
    min_sim: f64,
    ids: &mut IdAllocator,
) -> Result<IdMapping> {
    let embedding = |inst: &Instance| {
        inst.embedding
            .clone()
            .ok_or_else(|| Error::Argument(format!("instance {} has no embedding", inst.id)))
    };
    let prev_e = prev.instances.iter().map(embedding).collect::<Result<Vec<_>>>()?;
    let cur_e = cur.instances.iter().map(embedding).collect::<Result<Vec<_>>>()?;
    let cost: Vec<Vec<f64>> = prev
        .instances
        .iter()
        .zip(&prev_e)
        .map(|(p, pe)| {
            cur.instances
                .iter()
                .zip(&cur_e)
                .map(|(c, ce)| {
                    let sim = cosine(pe, ce);
                    if p.class != c.class || sim < min_sim {
                        f64::INFINITY
                    } else {
                        1.0 - sim
                    }
                })
                .collect()
        })
        .collect();
    resolve(prev, cur, &cost, ids)
}

pub(crate) fn relabel(grid: &mut PanopticGrid, mapping: &IdMapping) {
    for id in grid.instances.iter_mut() {
        if *id != NO_INSTANCE {
            *id = mapping[id];
        }
    }
}

fn relabel_instances(frame: &FrameInstances, mapping: &IdMapping) -> FrameInstances {
    FrameInstances {
        instances: frame
            .instances
            .iter()
            .map(|i| Instance {
                id: mapping[&i.id],
                ..i.clone()
            })
            .collect(),
    }
}

/// Fresh IDs for every instance of every frame.
pub fn per_frame(seq: &TrackedSequence) -> TrackedSequence {
    let mut ids = IdAllocator::default();
    let mut out = seq.clone();
    for frame in out.frames.iter_mut() {
        let found = FrameInstances::extract(frame, None);
        let mapping: IdMapping = found.instances.iter().map(|i| (i.id, ids.fresh())).collect();
        relabel(frame, &mapping);
    }
    out
}

fn chain(
    seq: &TrackedSequence,
    embeddings: Option<&[BTreeMap<u32, Vec<f64>>]>,
    mut matcher: impl FnMut(&FrameInstances, &FrameInstances, &mut IdAllocator) -> Result<IdMapping>,
) -> Result<TrackedSequence> {
    if let Some(e) = embeddings {
        if e.len() != seq.len() {
            return Err(Error::Shape(format!(
                "{} embedding frames for {} frames",
                e.len(),
                seq.len()
            )));
        }
    }
    let mut ids = IdAllocator::default();
    let mut out = seq.clone();
    let mut prev = FrameInstances::default();
    for (t, frame) in out.frames.iter_mut().enumerate() {
        let cur = FrameInstances::extract(frame, embeddings.map(|e| &e[t]));
        let mapping = matcher(&prev, &cur, &mut ids)?;
        relabel(frame, &mapping);
        prev = relabel_instances(&cur, &mapping);
    }
    Ok(out)
}

pub fn iou_track(seq: &TrackedSequence, min_iou: f64) -> Result<TrackedSequence> {
    chain(seq, None, |p, c, ids| iou_match(p, c, min_iou, ids))
}

/// `embeddings[t]` maps frame `t`'s instance IDs to their embeddings.
pub fn cosine_track(
    seq: &TrackedSequence,
    embeddings: &[BTreeMap<u32, Vec<f64>>],
    min_sim: f64,
) -> Result<TrackedSequence> {
    chain(seq, Some(embeddings), |p, c, ids| cosine_match(p, c, min_sim, ids))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrackMethod {
    PerFrame,
    Iou,
    Cosine,
    Ab3dmot,
}

impl std::str::FromStr for TrackMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-frame" => Ok(TrackMethod::PerFrame),
            "iou" => Ok(TrackMethod::Iou),
            "cosine" => Ok(TrackMethod::Cosine),
            "ab3dmot" | "kalman" => Ok(TrackMethod::Ab3dmot),
            other => Err(Error::Argument(format!(
                "unknown tracking method {other:?} (per-frame, iou, cosine, ab3dmot)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackerParams {
    pub min_iou: f64,
    pub min_sim: f64,
    pub kalman: KalmanParams,
}

impl Default for TrackerParams {
    fn default() -> Self {
        Self {
            min_iou: 0.25,
            min_sim: 0.5,
            kalman: KalmanParams::default(),
        }
    }
}

/// Runs one baseline over a whole sequence.
pub fn track(
    seq: &TrackedSequence,
    method: TrackMethod,
    params: &TrackerParams,
    embeddings: Option<&[BTreeMap<u32, Vec<f64>>]>,
) -> Result<TrackedSequence> {
    match method {
        TrackMethod::PerFrame => Ok(per_frame(seq)),
        TrackMethod::Iou => iou_track(seq, params.min_iou),
        TrackMethod::Cosine => {
            let e = embeddings
                .ok_or_else(|| Error::Argument("cosine matching needs instance embeddings".into()))?;
            cosine_track(seq, e, params.min_sim)
        }
        TrackMethod::Ab3dmot => kalman_track(seq, &params.kalman),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::LabelSpec;

    fn spec() -> LabelSpec {
        LabelSpec::new(
            ["free", "car", "person"].map(String::from).to_vec(),
            vec![false, true, true],
            0,
            None,
        )
        .unwrap()
    }

    fn frame(labels: &[(u16, u32)], dims: [u32; 3]) -> PanopticGrid {
        let g = GridGeometry::unit(dims).unwrap();
        let n = g.num_voxels();
        PanopticGrid::new(
            g,
            labels.iter().map(|l| l.0).collect(),
            labels.iter().map(|l| l.1).collect(),
            vec![true; n],
        )
        .unwrap()
    }

    #[test]
    fn boxes() {
        let g = GridGeometry::unit([4, 4, 4]).unwrap();
        let b = box_from_instance(&[0], &g).unwrap();
        assert_eq!(b, Aabb { min: [0.0; 3], max: [1.0; 3] });
        let b = box_from_instance(&[0, 3], &g).unwrap();
        assert_eq!(b.size()[0], 4.0);
        assert!(box_from_instance(&[], &g).is_err());
    }

    #[test]
    fn aabb_iou() {
        let a = Aabb::from_center_size([0.0; 3], [2.0; 3]);
        assert_eq!(a.iou(&a), 1.0);
        let b = Aabb::from_center_size([1.0, 0.0, 0.0], [2.0; 3]);
        assert!((a.iou(&b) - 4.0 / 12.0).abs() < 1e-12);
        let c = Aabb::from_center_size([5.0, 0.0, 0.0], [2.0; 3]);
        assert_eq!(a.iou(&c), 0.0);
    }

    #[test]
    fn iou_match_identity_and_disjoint() {
        let f = frame(&[(1, 3), (1, 3), (0, 0), (2, 8)], [4, 1, 1]);
        let prev = FrameInstances::extract(&f, None);
        let mut ids = IdAllocator { next: 100 };
        let m = iou_match(&prev, &prev, 0.25, &mut ids).unwrap();
        assert_eq!(m, IdMapping::from([(3, 3), (8, 8)]));

        let g = frame(&[(0, 0), (0, 0), (1, 5), (0, 0)], [4, 1, 1]);
        let cur = FrameInstances::extract(&g, None);
        let m = iou_match(&prev, &cur, 0.25, &mut ids).unwrap();
        assert_eq!(m, IdMapping::from([(5, 100)]));
    }

    #[test]
    fn iou_match_shifted_instance() {
        // 4 voxels shifted by one: IoU 3/5
        let a = frame(&[(1, 1), (1, 1), (1, 1), (1, 1), (0, 0)], [5, 1, 1]);
        let b = frame(&[(0, 0), (1, 9), (1, 9), (1, 9), (1, 9)], [5, 1, 1]);
        let prev = FrameInstances::extract(&a, None);
        let cur = FrameInstances::extract(&b, None);
        assert_eq!(voxel_iou(&prev.instances[0].voxels, &cur.instances[0].voxels), 0.6);
        let mut ids = IdAllocator { next: 50 };
        assert_eq!(iou_match(&prev, &cur, 0.25, &mut ids).unwrap(), IdMapping::from([(9, 1)]));
        assert_eq!(
            iou_match(&prev, &cur, 0.7, &mut ids).unwrap(),
            IdMapping::from([(9, 50)])
        );
    }

    fn with_embeddings(f: &PanopticGrid, e: &[(u32, Vec<f64>)]) -> FrameInstances {
        let map: BTreeMap<u32, Vec<f64>> = e.iter().cloned().collect();
        FrameInstances::extract(f, Some(&map))
    }

    #[test]
    fn cosine_matching() {
        let f = frame(&[(1, 1), (1, 2)], [2, 1, 1]);
        let prev = with_embeddings(&f, &[(1, vec![1.0, 0.0]), (2, vec![0.0, 1.0])]);
        let mut ids = IdAllocator { next: 10 };
        assert_eq!(
            cosine_match(&prev, &prev, 0.5, &mut ids).unwrap(),
            IdMapping::from([(1, 1), (2, 2)])
        );

        let g = frame(&[(1, 7), (0, 0)], [2, 1, 1]);
        let cur = with_embeddings(&g, &[(7, vec![1.0, -1.0])]);
        let orth = with_embeddings(&f, &[(1, vec![1.0, 1.0]), (2, vec![-1.0, 1.0])]);
        assert_eq!(
            cosine_match(&orth, &cur, 0.5, &mut ids).unwrap(),
            IdMapping::from([(7, 10)])
        );

        let missing = FrameInstances::extract(&g, None);
        assert!(matches!(
            cosine_match(&prev, &missing, 0.5, &mut ids),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn cosine_forbids_class_mismatch() {
        let a = frame(&[(1, 1)], [1, 1, 1]);
        let b = frame(&[(2, 4)], [1, 1, 1]);
        let prev = with_embeddings(&a, &[(1, vec![1.0])]);
        let cur = with_embeddings(&b, &[(4, vec![1.0])]);
        let mut ids = IdAllocator { next: 9 };
        assert_eq!(cosine_match(&prev, &cur, 0.5, &mut ids).unwrap(), IdMapping::from([(4, 9)]));
    }

    #[test]
    fn per_frame_relabels_every_frame() {
        let g = GridGeometry::unit([2, 1, 1]).unwrap();
        let f = frame(&[(1, 4), (1, 4)], [2, 1, 1]);
        let seq = TrackedSequence::from_frames(spec(), g, vec![f.clone(), f]).unwrap();
        let out = per_frame(&seq);
        assert_eq!(out.frames()[0].instances(), &[1, 1]);
        assert_eq!(out.frames()[1].instances(), &[2, 2]);
        assert!(out.validate().is_empty());
    }

    #[test]
    fn method_names() {
        assert_eq!("per-frame".parse::<TrackMethod>().unwrap(), TrackMethod::PerFrame);
        assert_eq!("ab3dmot".parse::<TrackMethod>().unwrap(), TrackMethod::Ab3dmot);
        assert!("sort".parse::<TrackMethod>().is_err());
    }
}
