//! Box tracking with a constant-velocity Kalman filter, in the style of
//! AB3DMOT: predict every track, greedily associate detections by descending
//! 3D box IoU, update, spawn and retire.
//!
//! State is `[position(3), size(3), velocity(3)]`; boxes come from voxel
//! instances and are axis-aligned, so there is no heading.

use std::collections::BTreeMap;

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use super::{Aabb, FrameInstances, IdAllocator, IdMapping};
use crate::error::Result;
use crate::grid::TrackedSequence;

type State = SVector<f64, 9>;
type Cov = SMatrix<f64, 9, 9>;
type Obs = SVector<f64, 6>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KalmanParams {
    pub min_iou: f64,
    pub max_misses: u32,
    /// Process noise variances, m² per frame: position, size, velocity.
    pub process_noise: [f64; 3],
    /// Measurement noise variances, m²: position, size.
    pub measurement_noise: [f64; 2],
    /// Velocity variance of a freshly spawned track.
    pub initial_velocity_var: f64,
}

impl Default for KalmanParams {
    fn default() -> Self {
        Self {
            min_iou: 0.25,
            max_misses: 2,
            process_noise: [0.1, 0.05, 0.5],
            measurement_noise: [0.1, 0.05],
            initial_velocity_var: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackState {
    pub id: u32,
    pub class: u16,
    pub state: SVector<f64, 9>,
    pub covariance: SMatrix<f64, 9, 9>,
    pub age: u32,
    pub misses: u32,
}

impl TrackState {
    pub fn position(&self) -> [f64; 3] {
        [self.state[0], self.state[1], self.state[2]]
    }

    pub fn size(&self) -> [f64; 3] {
        [self.state[3], self.state[4], self.state[5]]
    }

    pub fn velocity(&self) -> [f64; 3] {
        [self.state[6], self.state[7], self.state[8]]
    }

    pub fn bbox(&self) -> Aabb {
        Aabb::from_center_size(self.position(), self.size().map(|s| s.max(0.0)))
    }
}

fn transition() -> SMatrix<f64, 9, 9> {
    let mut f = Cov::identity();
    for k in 0..3 {
        f[(k, 6 + k)] = 1.0;
    }
    f
}

fn observation() -> SMatrix<f64, 6, 9> {
    let mut h = SMatrix::<f64, 6, 9>::zeros();
    for k in 0..6 {
        h[(k, k)] = 1.0;
    }
    h
}

pub struct KalmanTracker {
    params: KalmanParams,
    tracks: Vec<TrackState>,
    ids: IdAllocator,
    f: Cov,
    h: SMatrix<f64, 6, 9>,
    q: Cov,
    r: SMatrix<f64, 6, 6>,
}

impl KalmanTracker {
    pub fn new(params: KalmanParams) -> Self {
        let [qp, qs, qv] = params.process_noise;
        let [rp, rs] = params.measurement_noise;
        let q = Cov::from_diagonal(&State::from_column_slice(&[qp, qp, qp, qs, qs, qs, qv, qv, qv]));
        let r = SMatrix::<f64, 6, 6>::from_diagonal(&Obs::from_column_slice(&[rp, rp, rp, rs, rs, rs]));
        Self {
            params,
            tracks: Vec::new(),
            ids: IdAllocator::default(),
            f: transition(),
            h: observation(),
            q,
            r,
        }
    }

    pub fn tracks(&self) -> &[TrackState] {
        &self.tracks
    }

    fn spawn(&mut self, class: u16, bbox: &Aabb) -> u32 {
        let [rp, rs] = self.params.measurement_noise;
        let c = bbox.center();
        let s = bbox.size();
        let state = State::from_column_slice(&[c[0], c[1], c[2], s[0], s[1], s[2], 0.0, 0.0, 0.0]);
        let v = self.params.initial_velocity_var;
        let covariance =
            Cov::from_diagonal(&State::from_column_slice(&[rp, rp, rp, rs, rs, rs, v, v, v]));
        let id = self.ids.fresh();
        self.tracks.push(TrackState {
            id,
            class,
            state,
            covariance,
            age: 1,
            misses: 0,
        });
        id
    }

    fn predict(&mut self) {
        for t in &mut self.tracks {
            t.state = self.f * t.state;
            t.covariance = self.f * t.covariance * self.f.transpose() + self.q;
        }
    }

    fn update(&self, t: &mut TrackState, bbox: &Aabb) {
        let c = bbox.center();
        let s = bbox.size();
        let z = Obs::from_column_slice(&[c[0], c[1], c[2], s[0], s[1], s[2]]);
        let innovation = z - self.h * t.state;
        let s_cov = self.h * t.covariance * self.h.transpose() + self.r;
        let s_inv = s_cov
            .try_inverse()
            .expect("innovation covariance is positive definite");
        let gain = t.covariance * self.h.transpose() * s_inv;
        t.state += gain * innovation;
        t.covariance = (Cov::identity() - gain * self.h) * t.covariance;
    }

    /// Advances one frame and returns the detection ID → track ID mapping.
    pub fn step(&mut self, detections: &FrameInstances) -> IdMapping {
        self.predict();

        // same-class (track, detection) pairs by descending IoU
        let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
        for (ti, t) in self.tracks.iter().enumerate() {
            let tb = t.bbox();
            for (di, d) in detections.instances.iter().enumerate() {
                if d.class != t.class {
                    continue;
                }
                let iou = tb.iou(&d.bbox);
                if iou > 0.0 && iou >= self.params.min_iou {
                    candidates.push((iou, ti, di));
                }
            }
        }
        candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

        let mut track_used = vec![false; self.tracks.len()];
        let mut det_track: Vec<Option<usize>> = vec![None; detections.len()];
        for (_, ti, di) in candidates {
            if track_used[ti] || det_track[di].is_some() {
                continue;
            }
            track_used[ti] = true;
            det_track[di] = Some(ti);
        }

        let mut mapping = IdMapping::new();
        for (di, d) in detections.instances.iter().enumerate() {
            if let Some(ti) = det_track[di] {
                let mut t = self.tracks[ti].clone();
                self.update(&mut t, &d.bbox);
                t.age += 1;
                t.misses = 0;
                mapping.insert(d.id, t.id);
                self.tracks[ti] = t;
            }
        }
        for (t, used) in self.tracks.iter_mut().zip(&track_used) {
            if !used {
                t.misses += 1;
            }
        }
        let max_misses = self.params.max_misses;
        self.tracks.retain(|t| t.misses <= max_misses);
        for (di, d) in detections.instances.iter().enumerate() {
            if det_track[di].is_none() {
                let id = self.spawn(d.class, &d.bbox);
                mapping.insert(d.id, id);
            }
        }
        mapping
    }
}

/// Tracks the instances of `seq` frame by frame and rewrites their IDs with
/// the matched track IDs.
pub fn kalman_track(seq: &TrackedSequence, params: &KalmanParams) -> Result<TrackedSequence> {
    let mut tracker = KalmanTracker::new(*params);
    let mut out = seq.clone();
    for frame in out.frames.iter_mut() {
        let dets = FrameInstances::extract(frame, None::<&BTreeMap<u32, Vec<f64>>>);
        let mapping = tracker.step(&dets);
        super::relabel(frame, &mapping);
    }
    Ok(out)
}
