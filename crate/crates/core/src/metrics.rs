//! Segmentation and tracking quality for 4D panoptic occupancy.
//!
//! STQ is the geometric mean of the semantic mIoU (SQ) and the association
//! quality AQ, a soft tube-IoU where each ground-truth tube is matched to every
//! overlapping predicted tube, weighted by the size of the overlap:
//!
//! ```text
//! AQ = 1/|I_G| * sum_i 1/|G_i| * sum_j |G_i ∩ P_j| * |G_i ∩ P_j| / |G_i ∪ P_j|
//! ```
//!
//! Only voxels visible in the ground truth are counted anywhere. The single
//! frame variants (AQ1, STQ1) treat every (instance, frame) pair as its own
//! instance on both sides.
//!
//! `flawed` mode reproduces an evaluation that intersects every predicted tube
//! with the ground-truth occupied space before computing AQ, so predictions
//! leaking into known free space are never penalised.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{LabelSpec, PanopticGrid, TrackedSequence, NO_INSTANCE};

/// Restrict both sequences to the voxels visible in `gt`.
///
/// The returned prediction carries the ground-truth visibility mask, so every
/// downstream count sees the same voxel set on both sides.
pub fn masked_pair(
    gt: &TrackedSequence,
    pred: &TrackedSequence,
) -> Result<(TrackedSequence, TrackedSequence)> {
    gt.check_compatible(pred)?;
    let mut masked_pred = pred.clone();
    for (p, g) in masked_pred.frames.iter_mut().zip(gt.frames()) {
        p.visibility.clone_from(&g.visibility);
    }
    Ok((gt.clone(), masked_pred))
}

/// C×C voxel counts, row = ground-truth class, column = predicted class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn zeros(classes: usize) -> Self {
        Self {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn num_classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, gt: usize, pred: usize) -> u64 {
        self.counts[gt * self.classes + pred]
    }

    fn add(&mut self, other: &ConfusionMatrix) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    pub fn true_positives(&self, class: usize) -> u64 {
        self.get(class, class)
    }

    pub fn false_positives(&self, class: usize) -> u64 {
        (0..self.classes)
            .filter(|&g| g != class)
            .map(|g| self.get(g, class))
            .sum()
    }

    pub fn false_negatives(&self, class: usize) -> u64 {
        (0..self.classes)
            .filter(|&p| p != class)
            .map(|p| self.get(class, p))
            .sum()
    }

    /// TP/(TP+FP+FN), or `None` when the class never occurs on either side.
    pub fn class_iou(&self, class: usize) -> Option<f64> {
        let tp = self.true_positives(class);
        let denom = tp + self.false_positives(class) + self.false_negatives(class);
        (denom > 0).then(|| tp as f64 / denom as f64)
    }
}

fn check_classes(seq: &TrackedSequence, role: &str) -> Result<()> {
    let c = seq.spec().num_classes();
    for (t, f) in seq.frames().iter().enumerate() {
        if let Some(v) = f.semantics().iter().position(|&s| s as usize >= c) {
            return Err(Error::Shape(format!(
                "{role} frame {t} voxel {v}: class {} outside {c} classes",
                f.semantics()[v]
            )));
        }
    }
    Ok(())
}

fn frame_confusion(gt: &PanopticGrid, pred: &PanopticGrid, classes: usize) -> ConfusionMatrix {
    let mut m = ConfusionMatrix::zeros(classes);
    for ((&g, &p), &vis) in gt
        .semantics()
        .iter()
        .zip(pred.semantics())
        .zip(gt.visibility())
    {
        if vis {
            m.counts[g as usize * classes + p as usize] += 1;
        }
    }
    m
}

/// Per-class voxel confusion over all frames, counting only voxels visible in
/// `gt`.
pub fn semantic_confusion(gt: &TrackedSequence, pred: &TrackedSequence) -> Result<ConfusionMatrix> {
    gt.check_compatible(pred)?;
    check_classes(gt, "ground truth")?;
    check_classes(pred, "prediction")?;
    Ok(confusion_unchecked(gt, pred))
}

fn confusion_unchecked(gt: &TrackedSequence, pred: &TrackedSequence) -> ConfusionMatrix {
    let classes = gt.spec().num_classes();
    let per_frame: Vec<ConfusionMatrix> = gt
        .frames()
        .par_iter()
        .zip(pred.frames())
        .map(|(g, p)| frame_confusion(g, p, classes))
        .collect();
    let mut total = ConfusionMatrix::zeros(classes);
    for m in &per_frame {
        total.add(m);
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassSubset {
    All,
    Things,
    Stuff,
}

impl ClassSubset {
    fn includes(self, spec: &LabelSpec, class: u16) -> bool {
        if class == spec.free_class {
            return false;
        }
        match self {
            ClassSubset::All => true,
            ClassSubset::Things => spec.is_thing(class),
            ClassSubset::Stuff => !spec.is_thing(class),
        }
    }
}

/// Mean IoU over the classes of `subset`; the free class never counts and
/// classes absent from both sides are skipped. Zero if nothing qualifies.
pub fn miou(confusion: &ConfusionMatrix, spec: &LabelSpec, subset: ClassSubset) -> f64 {
    let ious: Vec<f64> = (0..confusion.num_classes())
        .filter(|&c| subset.includes(spec, c as u16))
        .filter_map(|c| confusion.class_iou(c))
        .collect();
    if ious.is_empty() {
        0.0
    } else {
        ious.iter().sum::<f64>() / ious.len() as f64
    }
}

/// IoU of the occupied (non-free) voxel sets, visible voxels only.
///
/// Two sequences with no occupied voxels at all agree perfectly and score 1.
pub fn binary_iou(gt: &TrackedSequence, pred: &TrackedSequence) -> Result<f64> {
    gt.check_compatible(pred)?;
    Ok(binary_iou_unchecked(gt, pred))
}

fn binary_iou_unchecked(gt: &TrackedSequence, pred: &TrackedSequence) -> f64 {
    let free = gt.spec().free_class;
    let (inter, union) = gt
        .frames()
        .par_iter()
        .zip(pred.frames())
        .map(|(g, p)| {
            let mut inter = 0u64;
            let mut union = 0u64;
            for ((&gs, &ps), &vis) in g.semantics().iter().zip(p.semantics()).zip(g.visibility()) {
                if !vis {
                    continue;
                }
                let (go, po) = (gs != free, ps != free);
                inter += (go && po) as u64;
                union += (go || po) as u64;
            }
            (inter, union)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold((0u64, 0u64), |a, b| (a.0 + b.0, a.1 + b.1));
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct TubeEntry {
    pub frame: u32,
    pub voxel: u32,
    pub id: u64,
}

/// Instance tubes as (frame, voxel, id) entries sorted by (frame, voxel).
///
/// Built only from visible thing-class voxels carrying an instance ID.
/// Instance IDs on stuff or free voxels are dropped and counted in
/// [`TubeSet::dropped`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TubeSet {
    entries: Vec<TubeEntry>,
    dropped: u64,
}

impl TubeSet {
    /// Tubes of `seq`, masked by its own visibility.
    pub fn from_sequence(seq: &TrackedSequence) -> Self {
        Self::build(seq, seq)
    }

    fn build(seq: &TrackedSequence, visibility_from: &TrackedSequence) -> Self {
        let spec = seq.spec();
        let mut entries = Vec::new();
        let mut dropped = 0u64;
        for (t, (f, vf)) in seq.frames().iter().zip(visibility_from.frames()).enumerate() {
            for (v, ((&class, &inst), &vis)) in f
                .semantics()
                .iter()
                .zip(f.instances())
                .zip(vf.visibility())
                .enumerate()
            {
                if !vis || inst == NO_INSTANCE {
                    continue;
                }
                if !spec.is_thing(class) {
                    dropped += 1;
                    continue;
                }
                entries.push(TubeEntry {
                    frame: t as u32,
                    voxel: v as u32,
                    id: inst as u64,
                });
            }
        }
        if dropped > 0 {
            log::warn!("dropped {dropped} instance-labelled voxels on non-thing classes");
        }
        Self { entries, dropped }
    }

    pub fn entries(&self) -> &[TubeEntry] {
        &self.entries
    }

    pub fn dropped(&self) -> u64 {
        self.dropped
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Instance ID → voxel count.
    pub fn sizes(&self) -> BTreeMap<u64, u64> {
        let mut m = BTreeMap::new();
        for e in &self.entries {
            *m.entry(e.id).or_insert(0) += 1;
        }
        m
    }

    /// Every (instance, frame) pair becomes its own instance.
    pub fn single_frame(&self) -> Self {
        Self {
            entries: self
                .entries
                .iter()
                .map(|e| TubeEntry {
                    id: ((e.frame as u64 + 1) << 32) | e.id,
                    ..*e
                })
                .collect(),
            dropped: self.dropped,
        }
    }

    /// Keep only the entries for which `keep(frame, voxel)` holds.
    pub fn restrict(&self, mut keep: impl FnMut(u32, u32) -> bool) -> Self {
        Self {
            entries: self
                .entries
                .iter()
                .copied()
                .filter(|e| keep(e.frame, e.voxel))
                .collect(),
            dropped: self.dropped,
        }
    }
}

/// Association quality of `pred` tubes against `gt` tubes.
///
/// No ground-truth instances: 1 if the prediction has none either, else 0.
pub fn aq(gt: &TubeSet, pred: &TubeSet) -> f64 {
    let gt_sizes = gt.sizes();
    let pred_sizes = pred.sizes();
    if gt_sizes.is_empty() {
        return if pred_sizes.is_empty() { 1.0 } else { 0.0 };
    }

    // Both entry lists are sorted by (frame, voxel) and unique in it.
    let mut overlap: HashMap<(u64, u64), u64> = HashMap::new();
    let (g, p) = (gt.entries(), pred.entries());
    let (mut a, mut b) = (0, 0);
    while a < g.len() && b < p.len() {
        let ka = (g[a].frame, g[a].voxel);
        let kb = (p[b].frame, p[b].voxel);
        match ka.cmp(&kb) {
            std::cmp::Ordering::Less => a += 1,
            std::cmp::Ordering::Greater => b += 1,
            std::cmp::Ordering::Equal => {
                *overlap.entry((g[a].id, p[b].id)).or_insert(0) += 1;
                a += 1;
                b += 1;
            }
        }
    }
    let mut pairs: Vec<((u64, u64), u64)> = overlap.into_iter().collect();
    pairs.sort_unstable();

    let mut per_gt: BTreeMap<u64, f64> = BTreeMap::new();
    for ((i, j), inter) in pairs {
        let gi = gt_sizes[&i];
        let union = gi + pred_sizes[&j] - inter;
        *per_gt.entry(i).or_insert(0.0) += (inter * inter) as f64 / union as f64;
    }
    let total: f64 = gt_sizes
        .iter()
        .map(|(i, &size)| per_gt.get(i).copied().unwrap_or(0.0) / size as f64)
        .sum();
    total / gt_sizes.len() as f64
}

/// AQ with tubes cut into per-frame instances on both sides.
pub fn aq1(gt: &TubeSet, pred: &TubeSet) -> f64 {
    aq(&gt.single_frame(), &pred.single_frame())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub stq: f64,
    pub aq: f64,
    pub stq1: f64,
    pub aq1: f64,
    pub miou_all: f64,
    pub miou_things: f64,
    pub miou_stuff: f64,
    pub binary_iou: f64,
    pub per_class_iou: Vec<Option<f64>>,
    pub confusion: ConfusionMatrix,
    pub flawed: bool,
    /// Predicted instance voxels ignored because their class is not a thing.
    pub dropped_pred_voxels: u64,
}

impl MetricReport {
    /// One `key = value` line per entry, keys sorted.
    ///
    /// Classes absent from both sides have no `class_iou` line.
    pub fn to_text_map(&self) -> String {
        let mut map: BTreeMap<String, String> = BTreeMap::new();
        for (k, v) in [
            ("stq", self.stq),
            ("aq", self.aq),
            ("stq1", self.stq1),
            ("aq1", self.aq1),
            ("miou_all", self.miou_all),
            ("miou_things", self.miou_things),
            ("miou_stuff", self.miou_stuff),
            ("binary_iou", self.binary_iou),
        ] {
            map.insert(k.to_string(), format!("{v}"));
        }
        map.insert("flawed".into(), (self.flawed as u8).to_string());
        map.insert("dropped_pred_voxels".into(), self.dropped_pred_voxels.to_string());
        for (c, iou) in self.per_class_iou.iter().enumerate() {
            if let Some(iou) = iou {
                map.insert(format!("class_iou.{c:03}"), format!("{iou}"));
            }
        }
        let n = self.confusion.num_classes();
        for g in 0..n {
            for p in 0..n {
                map.insert(
                    format!("confusion.{g:03}.{p:03}"),
                    self.confusion.get(g, p).to_string(),
                );
            }
        }
        let mut out = String::new();
        for (k, v) in map {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

/// Parses a `key = value` text map back into numbers.
pub fn parse_text_map(text: &str) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Argument(format!("line {}: expected `key = value`", n + 1)))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| Error::Argument(format!("line {}: bad number {:?}", n + 1, v.trim())))?;
        out.insert(k.trim().to_string(), v);
    }
    Ok(out)
}

/// Full metric report of `pred` against `gt`, evaluated on the voxels visible
/// in `gt`.
pub fn stq_report(gt: &TrackedSequence, pred: &TrackedSequence, flawed: bool) -> Result<MetricReport> {
    gt.check_compatible(pred)?;
    check_classes(gt, "ground truth")?;
    check_classes(pred, "prediction")?;
    let spec = gt.spec();

    let confusion = confusion_unchecked(gt, pred);
    let miou_all = miou(&confusion, spec, ClassSubset::All);
    let miou_things = miou(&confusion, spec, ClassSubset::Things);
    let miou_stuff = miou(&confusion, spec, ClassSubset::Stuff);
    let per_class_iou = (0..confusion.num_classes())
        .map(|c| {
            if c == spec.free_class as usize {
                None
            } else {
                confusion.class_iou(c)
            }
        })
        .collect();
    let binary_iou = binary_iou_unchecked(gt, pred);

    let gt_tubes = TubeSet::build(gt, gt);
    let mut pred_tubes = TubeSet::build(pred, gt);
    let dropped_pred_voxels = pred_tubes.dropped();
    if flawed {
        let free = spec.free_class;
        let frames = gt.frames();
        pred_tubes =
            pred_tubes.restrict(|t, v| frames[t as usize].semantics()[v as usize] != free);
    }
    let aq_value = aq(&gt_tubes, &pred_tubes);
    let aq1_value = aq1(&gt_tubes, &pred_tubes);

    Ok(MetricReport {
        stq: (miou_all * aq_value).sqrt(),
        aq: aq_value,
        stq1: (miou_all * aq1_value).sqrt(),
        aq1: aq1_value,
        miou_all,
        miou_things,
        miou_stuff,
        binary_iou,
        per_class_iou,
        confusion,
        flawed,
        dropped_pred_voxels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridGeometry;

    // 0 free, 1 road, 2 car, 3 truck
    fn spec() -> LabelSpec {
        LabelSpec::new(
            ["free", "road", "car", "truck"].map(String::from).to_vec(),
            vec![false, false, true, true],
            0,
            None,
        )
        .unwrap()
    }

    fn seq(frames: Vec<(Vec<u16>, Vec<u32>)>, dims: [u32; 3]) -> TrackedSequence {
        let g = GridGeometry::unit(dims).unwrap();
        let n = g.num_voxels();
        let frames = frames
            .into_iter()
            .map(|(s, i)| PanopticGrid::new(g, s, i, vec![true; n]).unwrap())
            .collect();
        TrackedSequence::from_frames(spec(), g, frames).unwrap()
    }

    #[test]
    fn masked_pair_copies_gt_visibility() {
        let gt = seq(vec![(vec![0, 2], vec![0, 1])], [2, 1, 1]);
        let (g2, p2) = masked_pair(&gt, &gt).unwrap();
        assert_eq!(g2, gt);
        assert_eq!(p2, gt);

        let g = *gt.geometry();
        let hidden = PanopticGrid::new(g, vec![0, 2], vec![0, 1], vec![false, false]).unwrap();
        let gt_hidden = TrackedSequence::from_frames(spec(), g, vec![hidden]).unwrap();
        let (_, p) = masked_pair(&gt_hidden, &gt).unwrap();
        assert!(p.frames()[0].visibility().iter().all(|v| !v));
        let c = semantic_confusion(&gt_hidden, &p).unwrap();
        assert_eq!((0..4).flat_map(|a| (0..4).map(move |b| (a, b))).map(|(a, b)| c.get(a, b)).sum::<u64>(), 0);
    }

    #[test]
    fn masked_pair_rejects_mismatch() {
        let a = seq(vec![(vec![0, 0], vec![0, 0])], [2, 1, 1]);
        let b = seq(vec![(vec![0; 4], vec![0; 4])], [4, 1, 1]);
        assert!(matches!(masked_pair(&a, &b), Err(Error::Shape(_))));
    }

    #[test]
    fn confusion_single_voxel() {
        let gt = seq(vec![(vec![2], vec![0])], [1, 1, 1]);
        let pred = seq(vec![(vec![3], vec![0])], [1, 1, 1]);
        let c = semantic_confusion(&gt, &pred).unwrap();
        for a in 0..4 {
            for b in 0..4 {
                assert_eq!(c.get(a, b), u64::from((a, b) == (2, 3)));
            }
        }
    }

    #[test]
    fn miou_examples() {
        let gt = seq(vec![(vec![1, 1, 2, 0], vec![0; 4])], [4, 1, 1]);
        let c = semantic_confusion(&gt, &gt).unwrap();
        assert_eq!(miou(&c, gt.spec(), ClassSubset::All), 1.0);

        let a = seq(vec![(vec![1; 4], vec![0; 4])], [4, 1, 1]);
        let b = seq(vec![(vec![2; 4], vec![0; 4])], [4, 1, 1]);
        let c = semantic_confusion(&a, &b).unwrap();
        assert_eq!(miou(&c, a.spec(), ClassSubset::All), 0.0);

        // road IoU 1/2, car IoU 1/4
        let gt = seq(vec![(vec![1, 1, 2, 0, 0, 0], vec![0; 6])], [6, 1, 1]);
        let pr = seq(vec![(vec![1, 0, 2, 2, 2, 2], vec![0; 6])], [6, 1, 1]);
        let c = semantic_confusion(&gt, &pr).unwrap();
        assert_eq!(c.class_iou(1), Some(0.5));
        assert_eq!(c.class_iou(2), Some(0.25));
        assert_eq!(miou(&c, gt.spec(), ClassSubset::All), 0.375);
        assert_eq!(miou(&c, gt.spec(), ClassSubset::Stuff), 0.5);
        assert_eq!(miou(&c, gt.spec(), ClassSubset::Things), 0.25);
    }

    #[test]
    fn binary_iou_examples() {
        let a = seq(vec![(vec![1, 1, 1, 1, 0, 0, 0, 0], vec![0; 8])], [8, 1, 1]);
        assert_eq!(binary_iou(&a, &a).unwrap(), 1.0);
        let b = seq(vec![(vec![0, 0, 0, 0, 1, 1, 1, 1], vec![0; 8])], [8, 1, 1]);
        assert_eq!(binary_iou(&a, &b).unwrap(), 0.0);
        // gt 4 voxels, pred 6, 3 shared
        let c = seq(vec![(vec![0, 1, 1, 1, 1, 1, 1, 0], vec![0; 8])], [8, 1, 1]);
        assert_eq!(binary_iou(&a, &c).unwrap(), 3.0 / 7.0);
    }

    #[test]
    fn aq_split_instance() {
        let gt = seq(vec![(vec![2; 4], vec![1; 4])], [4, 1, 1]);
        let pred = seq(vec![(vec![2; 4], vec![5, 5, 6, 6])], [4, 1, 1]);
        let g = TubeSet::from_sequence(&gt);
        let p = TubeSet::from_sequence(&pred);
        assert_eq!(aq(&g, &p), 0.5);
        assert_eq!(aq(&g, &g), 1.0);
        assert_eq!(aq(&g, &TubeSet::default()), 0.0);
    }

    #[test]
    fn aq_empty_ground_truth() {
        assert_eq!(aq(&TubeSet::default(), &TubeSet::default()), 1.0);
        let pred = seq(vec![(vec![2], vec![3])], [1, 1, 1]);
        assert_eq!(aq(&TubeSet::default(), &TubeSet::from_sequence(&pred)), 0.0);
    }

    #[test]
    fn false_positive_in_free_space() {
        // gt instance {A}; pred instance {A, B} with B free in gt.
        let gt = seq(vec![(vec![2, 0], vec![1, 0])], [2, 1, 1]);
        let pred = seq(vec![(vec![2, 2], vec![1, 1])], [2, 1, 1]);
        let corrected = stq_report(&gt, &pred, false).unwrap();
        let flawed = stq_report(&gt, &pred, true).unwrap();
        assert_eq!(corrected.aq, 0.5);
        assert_eq!(flawed.aq, 1.0);
        assert_eq!(corrected.miou_all, flawed.miou_all);
    }

    #[test]
    fn aq1_ignores_id_switch_across_frames() {
        let gt = seq(
            vec![(vec![2, 2], vec![1, 1]), (vec![2, 2], vec![1, 1])],
            [2, 1, 1],
        );
        let pred = seq(
            vec![(vec![2, 2], vec![1, 1]), (vec![2, 2], vec![9, 9])],
            [2, 1, 1],
        );
        let r = stq_report(&gt, &pred, false).unwrap();
        assert!(r.aq < 1.0);
        assert_eq!(r.aq1, 1.0);
        // tube of 4, two halves of 2: (1/4)(2*2/4 + 2*2/4)
        assert_eq!(r.aq, 0.5);
    }

    #[test]
    fn perfect_report() {
        let gt = seq(vec![(vec![1, 2, 0, 3], vec![0, 4, 0, 5])], [4, 1, 1]);
        let r = stq_report(&gt, &gt, false).unwrap();
        for v in [r.stq, r.aq, r.stq1, r.aq1, r.miou_all, r.miou_things, r.miou_stuff, r.binary_iou] {
            assert_eq!(v, 1.0);
        }
        for a in 0..4 {
            for b in 0..4 {
                if a != b {
                    assert_eq!(r.confusion.get(a, b), 0);
                }
            }
        }
    }

    #[test]
    fn dropped_voxels_counted() {
        let gt = seq(vec![(vec![1, 2], vec![0, 1])], [2, 1, 1]);
        let pred = seq(vec![(vec![1, 2], vec![7, 1])], [2, 1, 1]);
        let r = stq_report(&gt, &pred, false).unwrap();
        assert_eq!(r.dropped_pred_voxels, 1);
        assert_eq!(r.aq, 1.0);
    }

    #[test]
    fn text_map_sorted_and_parseable() {
        let gt = seq(vec![(vec![1, 2], vec![0, 1])], [2, 1, 1]);
        let r = stq_report(&gt, &gt, false).unwrap();
        let text = r.to_text_map();
        let keys: Vec<&str> = text.lines().map(|l| l.split(" = ").next().unwrap()).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        let map = parse_text_map(&text).unwrap();
        assert_eq!(map["stq"], 1.0);
        assert_eq!(map["confusion.001.001"], 1.0);
        assert!(!map.contains_key("class_iou.003"));
    }

    #[test]
    fn out_of_range_class_is_shape_error() {
        let gt = seq(vec![(vec![1], vec![0])], [1, 1, 1]);
        let pred = seq(vec![(vec![9], vec![0])], [1, 1, 1]);
        assert!(matches!(stq_report(&gt, &pred, false), Err(Error::Shape(_))));
    }
}
