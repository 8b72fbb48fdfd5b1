mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use pot4d::grid::TrackedSequence;
use pot4d::io::{decode_ov4d, encode_ov4d};
use pot4d::metrics::stq_report;
use pot4d::serialization::{smsa_regroup, Curve, PointStream};
use pot4d::sim::corrupt;
use pot4d::track::per_frame;

use common::random_pair;

fn pair(seed: u64) -> (TrackedSequence, TrackedSequence) {
    random_pair(&mut ChaCha8Rng::seed_from_u64(seed))
}

/// Renames every predicted instance through an injective map.
fn rename(seq: &TrackedSequence, salt: u32) -> TrackedSequence {
    let mut out = seq.clone();
    let mut map = BTreeMap::new();
    for f in out.frames_mut() {
        let (geom, sem, mut inst, vis) = f.clone().into_parts();
        for i in inst.iter_mut().filter(|i| **i != 0) {
            let next = map.len() as u32;
            *i = *map.entry(*i).or_insert(1000 + salt + 7 * next);
        }
        *f = pot4d::grid::PanopticGrid::new(geom, sem, inst, vis).unwrap();
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn metrics_stay_in_unit_interval(seed in any::<u64>(), flawed in any::<bool>()) {
        let (gt, pred) = pair(seed);
        let r = stq_report(&gt, &pred, flawed).unwrap();
        for v in [r.stq, r.aq, r.stq1, r.aq1, r.miou_all, r.miou_things, r.miou_stuff, r.binary_iou] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn renaming_prediction_ids_changes_nothing(seed in any::<u64>(), salt in 0u32..1000) {
        let (gt, pred) = pair(seed);
        let a = stq_report(&gt, &pred, false).unwrap();
        let b = stq_report(&gt, &rename(&pred, salt), false).unwrap();
        // summation order follows the IDs, so allow rounding
        for (x, y) in [(a.aq, b.aq), (a.aq1, b.aq1), (a.stq, b.stq), (a.stq1, b.stq1)] {
            prop_assert!((x - y).abs() < 1e-12);
        }
        prop_assert_eq!(a.confusion, b.confusion);
    }

    #[test]
    fn per_frame_ids_keep_aq1(seed in any::<u64>()) {
        let (gt, pred) = pair(seed);
        let a = stq_report(&gt, &pred, false).unwrap();
        let b = stq_report(&gt, &per_frame(&pred), false).unwrap();
        prop_assert_eq!(a.aq1, b.aq1);
    }

    #[test]
    fn flawed_never_below_corrected(seed in any::<u64>()) {
        // the flawed variant only ever removes predicted voxels that cannot
        // intersect a ground-truth tube
        let (gt, pred) = pair(seed);
        let c = stq_report(&gt, &pred, false).unwrap();
        let f = stq_report(&gt, &pred, true).unwrap();
        prop_assert!(f.aq >= c.aq - 1e-12);
    }

    #[test]
    fn ov4d_roundtrip_is_exact(seed in any::<u64>()) {
        let (gt, pred) = pair(seed);
        prop_assert_eq!(decode_ov4d(&encode_ov4d(&gt), "m").unwrap(), gt);
        prop_assert_eq!(decode_ov4d(&encode_ov4d(&pred), "m").unwrap(), pred);
    }

    #[test]
    fn no_corruption_is_identity(seed in any::<u64>()) {
        let (gt, _) = pair(seed);
        prop_assert_eq!(corrupt(&gt, &[], seed).unwrap(), gt);
    }

    #[test]
    fn regroup_roundtrip(
        sizes in prop::collection::vec(0usize..40, 1..5),
        seed in any::<u64>(),
        window in 1usize..20,
        hilbert in any::<bool>(),
    ) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dims = [13, 5, 9];
        let streams: Vec<PointStream> = sizes
            .iter()
            .enumerate()
            .map(|(s, &n)| {
                let pts = (0..n).map(|_| std::array::from_fn(|k| rng.gen_range(0..dims[k]))).collect();
                let refs = (0..n).map(|_| rng.gen()).collect();
                PointStream::with_payload(dims, pts, s as u16, refs).unwrap()
            })
            .collect();
        let curve = if hilbert { Curve::Hilbert } else { Curve::Morton };
        let r = smsa_regroup(&streams, curve, window).unwrap();
        let total: usize = sizes.iter().sum();
        prop_assert_eq!(r.windows.iter().map(|w| w.len()).sum::<usize>(), total);
        let back = r.split_streams(&r.merged_indices(&streams), &r.merged_payload(&streams)).unwrap();
        prop_assert_eq!(back, streams);
    }
}
