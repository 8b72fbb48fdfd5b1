mod common;

use pot4d::grid::{GridGeometry, PanopticGrid};
use pot4d::track::{FrameInstances, KalmanParams, KalmanTracker};

use common::label_spec;

/// Position/velocity filter along one axis, written out in scalars. The full
/// tracker's axes are uncoupled, so each behaves exactly like this.
struct Axis {
    p: f64,
    v: f64,
    pp: f64,
    pv: f64,
    vv: f64,
}

impl Axis {
    fn new(z: f64, r: f64, v0: f64) -> Self {
        Self { p: z, v: 0.0, pp: r, pv: 0.0, vv: v0 }
    }

    fn predict(&mut self, qp: f64, qv: f64) {
        self.p += self.v;
        let pp = self.pp + 2.0 * self.pv + self.vv + qp;
        let pv = self.pv + self.vv;
        self.pp = pp;
        self.pv = pv;
        self.vv += qv;
    }

    fn update(&mut self, z: f64, r: f64) {
        let s = self.pp + r;
        let kp = self.pp / s;
        let kv = self.pv / s;
        let y = z - self.p;
        self.p += kp * y;
        self.v += kv * y;
        let (pp, pv, vv) = (self.pp, self.pv, self.vv);
        self.pp = (1.0 - kp) * pp;
        self.pv = (1.0 - kp) * pv;
        self.vv = vv - kv * pv;
    }
}

#[test]
fn velocity_matches_scalar_recursion() {
    let spec = label_spec(&["free", "car"], &[false, true]);
    let geom = GridGeometry::new([0.0; 3], [0.5; 3], [60, 8, 2]).unwrap();
    let params = KalmanParams::default();
    let mut tracker = KalmanTracker::new(params);
    // uneven steps so the filter has something to smooth
    let starts = [2u32, 3, 5, 6, 9, 11, 12, 15, 17, 18];
    let mut axis: Option<Axis> = None;
    for &x0 in &starts {
        let mut f = PanopticGrid::filled(geom, spec.free_class);
        for x in x0..x0 + 6 {
            for y in 2..5 {
                f.set(geom.linear([x, y, 0]), 1, 1);
            }
        }
        // the box spans voxel centers, so its center is the mean of the two
        // extreme centers
        let z = 0.5 * ((x0 as f64 + 0.5) + (x0 as f64 + 5.5)) * 0.5;
        tracker.step(&FrameInstances::extract(&f, None));
        let [rp, _] = params.measurement_noise;
        match axis.as_mut() {
            None => axis = Some(Axis::new(z, rp, params.initial_velocity_var)),
            Some(a) => {
                a.predict(params.process_noise[0], params.process_noise[2]);
                a.update(z, rp);
            }
        }
        let t = &tracker.tracks()[0];
        let a = axis.as_ref().unwrap();
        assert!((t.position()[0] - a.p).abs() < 1e-9, "{} vs {}", t.position()[0], a.p);
        assert!((t.velocity()[0] - a.v).abs() < 1e-9, "{} vs {}", t.velocity()[0], a.v);
    }
    assert_eq!(tracker.tracks().len(), 1);
    // roughly 0.8 m per frame on average
    assert!((tracker.tracks()[0].velocity()[0] - 0.8).abs() < 0.4);
}
