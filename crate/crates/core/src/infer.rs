//! Turning raw decoder query outputs into panoptic grids.
//!
//! A query scores `s_q = max(class_scores)`; queries below the threshold are
//! dropped and every voxel goes to the query maximising `s_q * m_{q,x}`.
//! In [`Aggregation::Split`] mode the stuff and instance winners are found
//! separately and an instance winner overrides the stuff winner wherever its
//! voxel score reaches the voxel floor. [`Aggregation::Unified`] takes one
//! joint argmax.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridGeometry, LabelSpec, PanopticGrid, TrackedSequence, NO_INSTANCE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryKind {
    Stuff,
    Instance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    #[default]
    Split,
    Unified,
}

/// Raw per-query outputs for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryOutput {
    dims: [u32; 3],
    num_classes: usize,
    /// Q×C, row-major.
    class_scores: Vec<f32>,
    kinds: Vec<QueryKind>,
    /// 0 for stuff queries.
    track_ids: Vec<u32>,
    /// Q×N, row-major.
    mask_scores: Vec<f32>,
}

impl QueryOutput {
    pub fn new(
        dims: [u32; 3],
        num_classes: usize,
        class_scores: Vec<f32>,
        kinds: Vec<QueryKind>,
        track_ids: Vec<u32>,
        mask_scores: Vec<f32>,
    ) -> Result<Self> {
        let q = kinds.len();
        let n: usize = dims.iter().map(|&d| d as usize).product();
        if class_scores.len() != q * num_classes {
            return Err(Error::Shape(format!(
                "{} class scores for {q} queries × {num_classes} classes",
                class_scores.len()
            )));
        }
        if track_ids.len() != q {
            return Err(Error::Shape(format!("{} track IDs for {q} queries", track_ids.len())));
        }
        if mask_scores.len() != q * n {
            return Err(Error::Shape(format!(
                "{} mask scores for {q} queries × {n} voxels",
                mask_scores.len()
            )));
        }
        for (i, (&k, &t)) in kinds.iter().zip(&track_ids).enumerate() {
            match (k, t) {
                (QueryKind::Stuff, t) if t != NO_INSTANCE => {
                    return Err(Error::Argument(format!("stuff query {i} carries track ID {t}")))
                }
                (QueryKind::Instance, NO_INSTANCE) => {
                    return Err(Error::Argument(format!("instance query {i} has no track ID")))
                }
                _ => {}
            }
        }
        Ok(Self {
            dims,
            num_classes,
            class_scores,
            kinds,
            track_ids,
            mask_scores,
        })
    }

    pub fn dims(&self) -> [u32; 3] {
        self.dims
    }

    pub fn num_queries(&self) -> usize {
        self.kinds.len()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_voxels(&self) -> usize {
        self.dims.iter().map(|&d| d as usize).product()
    }

    pub fn class_scores(&self, q: usize) -> &[f32] {
        &self.class_scores[q * self.num_classes..(q + 1) * self.num_classes]
    }

    pub fn mask(&self, q: usize) -> &[f32] {
        let n = self.num_voxels();
        &self.mask_scores[q * n..(q + 1) * n]
    }

    pub fn kind(&self, q: usize) -> QueryKind {
        self.kinds[q]
    }

    pub fn kinds(&self) -> &[QueryKind] {
        &self.kinds
    }

    pub fn track_ids(&self) -> &[u32] {
        &self.track_ids
    }

    pub fn all_class_scores(&self) -> &[f32] {
        &self.class_scores
    }

    pub fn all_mask_scores(&self) -> &[f32] {
        &self.mask_scores
    }
}

/// `s_q`: the query's largest class score.
pub fn query_score(out: &QueryOutput, q: usize) -> Result<f64> {
    if q >= out.num_queries() {
        return Err(Error::Range(format!("query {q} of {}", out.num_queries())));
    }
    Ok(out
        .class_scores(q)
        .iter()
        .fold(0.0f32, |m, &s| m.max(s)) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InferenceParams {
    /// Queries scoring below this are dropped.
    pub threshold: f64,
    /// A voxel is claimed only if the winner's `s_q * m` reaches
    /// `0.5 * mask_threshold`.
    pub mask_threshold: f64,
    pub mode: Aggregation,
}

impl Default for InferenceParams {
    fn default() -> Self {
        Self {
            threshold: 0.3,
            mask_threshold: 0.5,
            mode: Aggregation::Split,
        }
    }
}

impl InferenceParams {
    pub fn voxel_floor(&self) -> f64 {
        0.5 * self.mask_threshold
    }
}

/// Class written for a winning query: argmax over thing classes for
/// instance queries, over all non-free classes otherwise. Ties go to the
/// lowest class index.
fn winning_class(out: &QueryOutput, q: usize, spec: &LabelSpec) -> Option<u16> {
    let mut best: Option<(u16, f32)> = None;
    for (c, &s) in out.class_scores(q).iter().enumerate() {
        let c = c as u16;
        if c == spec.free_class {
            continue;
        }
        if out.kind(q) == QueryKind::Instance && !spec.is_thing(c) {
            continue;
        }
        if best.map_or(true, |(_, b)| s > b) {
            best = Some((c, s));
        }
    }
    best.map(|(c, _)| c)
}

pub fn aggregate(
    out: &QueryOutput,
    geom: &GridGeometry,
    spec: &LabelSpec,
    params: &InferenceParams,
) -> Result<PanopticGrid> {
    if out.dims() != geom.dims {
        return Err(Error::Shape(format!(
            "query masks cover {:?}, grid is {:?}",
            out.dims(),
            geom.dims
        )));
    }
    if out.num_classes() != spec.num_classes() {
        return Err(Error::Shape(format!(
            "queries score {} classes, label spec has {}",
            out.num_classes(),
            spec.num_classes()
        )));
    }
    if !(0.0..=1.0).contains(&params.threshold) {
        return Err(Error::Argument(format!("threshold {} outside [0, 1]", params.threshold)));
    }

    struct Live {
        q: usize,
        score: f64,
        class: u16,
        instance: u32,
        kind: QueryKind,
    }
    let mut live = Vec::new();
    for q in 0..out.num_queries() {
        let score = query_score(out, q)?;
        if score < params.threshold {
            continue;
        }
        // A query with no admissible class cannot claim voxels.
        let Some(class) = winning_class(out, q, spec) else {
            continue;
        };
        let kind = out.kind(q);
        live.push(Live {
            q,
            score,
            class,
            instance: if kind == QueryKind::Instance { out.track_ids()[q] } else { NO_INSTANCE },
            kind,
        });
    }

    let floor = params.voxel_floor();
    let mut grid = PanopticGrid::filled(*geom, spec.free_class);
    let masks: Vec<&[f32]> = live.iter().map(|l| out.mask(l.q)).collect();
    for v in 0..geom.num_voxels() {
        // (index into live, voxel score) of the best stuff / instance / any
        let mut best: [Option<(usize, f64)>; 2] = [None, None];
        for (k, l) in live.iter().enumerate() {
            let s = l.score * masks[k][v] as f64;
            let slot = match params.mode {
                Aggregation::Unified => 0,
                Aggregation::Split => (l.kind == QueryKind::Instance) as usize,
            };
            if best[slot].map_or(true, |(_, b)| s > b) {
                best[slot] = Some((k, s));
            }
        }
        let winner = match params.mode {
            Aggregation::Unified => best[0],
            Aggregation::Split => match best[1] {
                Some((k, s)) if s >= floor => Some((k, s)),
                _ => best[0],
            },
        };
        if let Some((k, s)) = winner {
            if s >= floor {
                grid.set(v, live[k].class, live[k].instance);
            }
        }
    }
    Ok(grid)
}

/// Aggregates every frame, keeping the queries' own track IDs.
pub fn tracked_by_query(
    frames: &[QueryOutput],
    geom: &GridGeometry,
    spec: &LabelSpec,
    params: &InferenceParams,
) -> Result<TrackedSequence> {
    let grids = frames
        .iter()
        .map(|f| aggregate(f, geom, spec, params))
        .collect::<Result<Vec<_>>>()?;
    TrackedSequence::from_frames(spec.clone(), *geom, grids)
}

/// Aggregates every frame and gives each frame's instances fresh IDs, so no
/// ID repeats across frames.
pub fn per_frame_ids(
    frames: &[QueryOutput],
    geom: &GridGeometry,
    spec: &LabelSpec,
    params: &InferenceParams,
) -> Result<TrackedSequence> {
    let seq = tracked_by_query(frames, geom, spec, params)?;
    Ok(crate::track::per_frame(&seq))
}
