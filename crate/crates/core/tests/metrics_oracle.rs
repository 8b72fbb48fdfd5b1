mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use pot4d::grid::{GridGeometry, PanopticGrid, TrackedSequence};
use pot4d::metrics::{binary_iou, stq_report};

use common::{label_spec, oracle_report, random_pair};

#[test]
fn random_sequences_match_set_oracle_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..300 {
        let (gt, pred) = random_pair(&mut rng);
        for flawed in [false, true] {
            let r = stq_report(&gt, &pred, flawed).unwrap();
            let o = oracle_report(&gt, &pred, flawed);
            let got = [r.stq, r.aq, r.stq1, r.aq1, r.miou_all, r.miou_things, r.miou_stuff, r.binary_iou];
            let want = [o.stq, o.aq, o.stq1, o.aq1, o.miou_all, o.miou_things, o.miou_stuff, o.binary_iou];
            assert_eq!(got, want, "case {case} flawed {flawed}");
        }
    }
}

#[test]
fn self_comparison_scores_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let (gt, _) = random_pair(&mut rng);
        let r = stq_report(&gt, &gt, false).unwrap();
        assert_eq!(r.aq, 1.0);
        assert_eq!(r.aq1, 1.0);
        assert_eq!(r.binary_iou, 1.0);
        // mIoU is 1 unless no non-free class is visible at all
        assert!(r.miou_all == 1.0 || r.miou_all == 0.0);
    }
}

#[test]
fn hidden_voxels_never_count() {
    let spec = label_spec(&["free", "car"], &[false, true]);
    let g = GridGeometry::unit([3, 1, 1]).unwrap();
    let gt = PanopticGrid::new(g, vec![1, 1, 0], vec![4, 4, 0], vec![true, false, false]).unwrap();
    let pred = PanopticGrid::new(g, vec![1, 0, 1], vec![4, 0, 9], vec![true; 3]).unwrap();
    let gt = TrackedSequence::from_frames(spec.clone(), g, vec![gt]).unwrap();
    let pred = TrackedSequence::from_frames(spec, g, vec![pred]).unwrap();
    let r = stq_report(&gt, &pred, false).unwrap();
    assert_eq!(r.aq, 1.0);
    assert_eq!(r.miou_all, 1.0);
    assert_eq!(binary_iou(&gt, &pred).unwrap(), 1.0);
}
