//! Shared generators and brute-force oracles for the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};
use rand::Rng;

use pot4d::grid::{GridGeometry, LabelSpec, PanopticGrid, TrackedSequence};
use pot4d::splat::{Gaussian, GaussianSet};

// ---------------------------------------------------------------- metrics

pub fn random_spec(rng: &mut impl Rng) -> LabelSpec {
    let n = rng.gen_range(2..=4usize);
    let mut thing: Vec<bool> = (0..n).map(|c| c > 0 && rng.gen_bool(0.5)).collect();
    if !thing.iter().any(|&t| t) {
        thing[n - 1] = true;
    }
    let classes = (0..n).map(|c| format!("c{c}")).collect();
    LabelSpec::new(classes, thing, 0, None).unwrap()
}

fn random_frame(
    rng: &mut impl Rng,
    geom: GridGeometry,
    spec: &LabelSpec,
    instances: u32,
    sloppy: bool,
) -> PanopticGrid {
    let n = geom.num_voxels();
    let classes = spec.num_classes() as u16;
    let mut sem = Vec::with_capacity(n);
    let mut inst = Vec::with_capacity(n);
    for _ in 0..n {
        let c = if rng.gen_bool(0.35) { 0 } else { rng.gen_range(0..classes) };
        let i = if spec.is_thing(c) || (sloppy && rng.gen_bool(0.05)) {
            rng.gen_range(0..=instances)
        } else {
            0
        };
        sem.push(c);
        inst.push(i);
    }
    let vis = (0..n).map(|_| rng.gen_bool(0.85)).collect();
    PanopticGrid::new(geom, sem, inst, vis).unwrap()
}

/// Ground truth and a prediction that mostly copies it with random damage.
/// Predictions may carry instance IDs on non-thing voxels.
pub fn random_pair(rng: &mut impl Rng) -> (TrackedSequence, TrackedSequence) {
    let spec = random_spec(rng);
    let dims = [rng.gen_range(1..=8), rng.gen_range(1..=8), rng.gen_range(1..=2)];
    let geom = GridGeometry::unit(dims).unwrap();
    let frames = rng.gen_range(1..=3);
    let instances = rng.gen_range(0..=5);
    let gt: Vec<PanopticGrid> = (0..frames)
        .map(|_| random_frame(rng, geom, &spec, instances, false))
        .collect();
    let copy_p = rng.gen_range(0.0..1.0);
    let pred: Vec<PanopticGrid> = gt
        .iter()
        .map(|g| {
            let noise = random_frame(rng, geom, &spec, instances, true);
            let (_, gs, gi, _) = g.clone().into_parts();
            let (_, ns, ni, nv) = noise.into_parts();
            let mut sem = Vec::new();
            let mut inst = Vec::new();
            for v in 0..gs.len() {
                if rng.gen_bool(copy_p) {
                    sem.push(gs[v]);
                    inst.push(gi[v]);
                } else {
                    sem.push(ns[v]);
                    inst.push(ni[v]);
                }
            }
            PanopticGrid::new(geom, sem, inst, nv).unwrap()
        })
        .collect();
    (
        TrackedSequence::from_frames(spec.clone(), geom, gt).unwrap(),
        TrackedSequence::from_frames(spec, geom, pred).unwrap(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleReport {
    pub stq: f64,
    pub aq: f64,
    pub stq1: f64,
    pub aq1: f64,
    pub miou_all: f64,
    pub miou_things: f64,
    pub miou_stuff: f64,
    pub binary_iou: f64,
}

type Cell = (usize, usize);

/// Tubes keyed by instance: a tube is the set of (frame, voxel) cells.
fn tubes(
    seq: &TrackedSequence,
    visible: &dyn Fn(usize, usize) -> bool,
    per_frame: bool,
) -> BTreeMap<(usize, u32), BTreeSet<Cell>> {
    let spec = seq.spec();
    let mut out: BTreeMap<(usize, u32), BTreeSet<Cell>> = BTreeMap::new();
    for (t, f) in seq.frames().iter().enumerate() {
        for v in 0..f.semantics().len() {
            let id = f.instances()[v];
            if id == 0 || !spec.is_thing(f.semantics()[v]) || !visible(t, v) {
                continue;
            }
            let key = if per_frame { (t, id) } else { (0, id) };
            out.entry(key).or_default().insert((t, v));
        }
    }
    out
}

/// AQ written as a literal double sum over tube sets.
fn oracle_aq(
    gt: &BTreeMap<(usize, u32), BTreeSet<Cell>>,
    pred: &BTreeMap<(usize, u32), BTreeSet<Cell>>,
) -> f64 {
    if gt.is_empty() {
        return if pred.is_empty() { 1.0 } else { 0.0 };
    }
    let mut total = 0.0;
    for g in gt.values() {
        let mut inner = 0.0;
        for p in pred.values() {
            let inter = g.intersection(p).count() as u64;
            let union = g.union(p).count() as u64;
            inner += (inter * inter) as f64 / union as f64;
        }
        total += inner / g.len() as f64;
    }
    total / gt.len() as f64
}

fn cells(seq: &TrackedSequence, gt: &TrackedSequence, keep: impl Fn(u16) -> bool) -> BTreeSet<Cell> {
    let mut s = BTreeSet::new();
    for (t, (f, g)) in seq.frames().iter().zip(gt.frames()).enumerate() {
        for v in 0..f.semantics().len() {
            if g.visibility()[v] && keep(f.semantics()[v]) {
                s.insert((t, v));
            }
        }
    }
    s
}

fn oracle_miou(gt: &TrackedSequence, pred: &TrackedSequence, include: impl Fn(u16) -> bool) -> f64 {
    let spec = gt.spec();
    let mut ious = Vec::new();
    for c in 0..spec.num_classes() as u16 {
        if c == spec.free_class || !include(c) {
            continue;
        }
        let g = cells(gt, gt, |s| s == c);
        let p = cells(pred, gt, |s| s == c);
        let union = g.union(&p).count();
        if union > 0 {
            ious.push(g.intersection(&p).count() as f64 / union as f64);
        }
    }
    if ious.is_empty() {
        0.0
    } else {
        ious.iter().sum::<f64>() / ious.len() as f64
    }
}

/// Every metric recomputed from explicit voxel sets.
pub fn oracle_report(gt: &TrackedSequence, pred: &TrackedSequence, flawed: bool) -> OracleReport {
    let spec = gt.spec().clone();
    let free = spec.free_class;
    let gt_visible = |t: usize, v: usize| gt.frames()[t].visibility()[v];
    let pred_visible = |t: usize, v: usize| {
        gt_visible(t, v) && (!flawed || gt.frames()[t].semantics()[v] != free)
    };
    let aq = oracle_aq(&tubes(gt, &gt_visible, false), &tubes(pred, &pred_visible, false));
    let aq1 = oracle_aq(&tubes(gt, &gt_visible, true), &tubes(pred, &pred_visible, true));
    let miou_all = oracle_miou(gt, pred, |_| true);
    let occ_g = cells(gt, gt, |s| s != free);
    let occ_p = cells(pred, gt, |s| s != free);
    let union = occ_g.union(&occ_p).count();
    OracleReport {
        stq: (miou_all * aq).sqrt(),
        aq,
        stq1: (miou_all * aq1).sqrt(),
        aq1,
        miou_all,
        miou_things: oracle_miou(gt, pred, |c| spec.is_thing(c)),
        miou_stuff: oracle_miou(gt, pred, |c| !spec.is_thing(c)),
        binary_iou: if union == 0 {
            1.0
        } else {
            occ_g.intersection(&occ_p).count() as f64 / union as f64
        },
    }
}

// ---------------------------------------------------------------- splatting

pub fn random_unit_quaternion(rng: &mut impl Rng) -> [f64; 4] {
    loop {
        let q: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 0.1 && n <= 1.0 {
            return q.map(|v| v / n);
        }
    }
}

pub fn random_gaussian(rng: &mut impl Rng, lo: [f64; 3], hi: [f64; 3], scale: (f64, f64), dim: usize) -> Gaussian {
    Gaussian {
        center: std::array::from_fn(|k| rng.gen_range(lo[k]..hi[k])),
        scale: std::array::from_fn(|_| rng.gen_range(scale.0..scale.1)),
        rotation: random_unit_quaternion(rng),
        opacity: rng.gen_range(0.01..=1.0),
        embedding: (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect(),
    }
}

/// Up to 64 Gaussians with embeddings of width at most 16 around `geom`.
pub fn random_set(rng: &mut impl Rng, geom: &GridGeometry) -> GaussianSet {
    let dim = rng.gen_range(1..=16);
    let count = rng.gen_range(0..=64);
    let lo = geom.origin;
    let hi: [f64; 3] = std::array::from_fn(|k| geom.origin[k] + geom.voxel_size[k] * geom.dims[k] as f64);
    let gs = (0..count)
        .map(|_| random_gaussian(rng, lo, hi, (0.2, 2.0), dim))
        .collect();
    GaussianSet::new(gs, dim).unwrap()
}

/// Occupancy and feature at `x`, straight from the defining formulas with an
/// explicitly inverted covariance.
pub fn literal_splat(set: &GaussianSet, x: [f64; 3]) -> (f64, Vec<f64>) {
    let x = Vector3::from(x);
    let mut free = 1.0;
    let mut num = vec![0.0; set.embedding_dim()];
    let mut den = 0.0;
    for g in set.gaussians() {
        let [w, i, j, k] = g.rotation;
        let r = UnitQuaternion::from_quaternion(Quaternion::new(w, i, j, k)).to_rotation_matrix();
        let s = Matrix3::from_diagonal(&Vector3::from(g.scale.map(|v| v * v)));
        let sigma = r.matrix() * s * r.matrix().transpose();
        let inv = sigma.try_inverse().unwrap();
        let d = x - Vector3::from(g.center);
        let m2 = (d.transpose() * inv * d)[(0, 0)];
        free *= 1.0 - (-0.5 * m2).exp();
        let pdf = (-0.5 * m2).exp() / ((2.0 * PI).powi(3) * sigma.determinant()).sqrt();
        den += g.opacity * pdf;
        for (n, e) in num.iter_mut().zip(&g.embedding) {
            *n += g.opacity * pdf * e;
        }
    }
    let occ = 1.0 - free;
    let feat = if den < 1e-12 {
        vec![0.0; num.len()]
    } else {
        num.iter().map(|n| occ * n / den).collect()
    };
    (occ, feat)
}

// ---------------------------------------------------------------- assignment

/// Minimum total cost over all injective row→column maps of maximal size,
/// by exhaustive enumeration of permutations.
pub fn brute_force_assignment(cost: &[Vec<f64>]) -> f64 {
    let rows = cost.len();
    let cols = cost.first().map_or(0, Vec::len);
    let transpose = rows > cols;
    let (r, c) = if transpose { (cols, rows) } else { (rows, cols) };
    let at = |i: usize, j: usize| if transpose { cost[j][i] } else { cost[i][j] };
    let mut best = f64::INFINITY;
    let mut used = vec![false; c];
    fn go(i: usize, r: usize, c: usize, acc: f64, used: &mut Vec<bool>, best: &mut f64, at: &dyn Fn(usize, usize) -> f64) {
        if i == r {
            *best = best.min(acc);
            return;
        }
        for j in 0..c {
            if !used[j] {
                used[j] = true;
                go(i + 1, r, c, acc + at(i, j), used, best, at);
                used[j] = false;
            }
        }
    }
    go(0, r, c, 0.0, &mut used, &mut best, &at);
    best
}

pub fn label_spec(names: &[&str], thing: &[bool]) -> LabelSpec {
    LabelSpec::new(names.iter().map(|s| s.to_string()).collect(), thing.to_vec(), 0, None).unwrap()
}
