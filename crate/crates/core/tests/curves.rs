use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pot4d::serialization::{
    bits_for_dims, hilbert_code, morton_code, serialize, smsa_regroup, windows, Curve, PointStream,
};

/// Bit interleaving one bit at a time.
fn naive_morton(p: [u32; 3], bits: u32) -> u64 {
    let mut code = 0u64;
    for b in 0..bits {
        for (k, &c) in p.iter().enumerate() {
            code |= (((c >> b) & 1) as u64) << (3 * b + k as u32);
        }
    }
    code
}

#[test]
fn morton_matches_naive_interleave() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20_000 {
        let bits = rng.gen_range(1..=21);
        let p = std::array::from_fn(|_| rng.gen_range(0..1u32 << bits));
        assert_eq!(morton_code(p, bits).unwrap(), naive_morton(p, bits));
    }
}

#[test]
fn codes_are_bijective_on_16_cube() {
    for curve in [Curve::Morton, Curve::Hilbert] {
        let mut seen = HashSet::new();
        for z in 0..16 {
            for y in 0..16 {
                for x in 0..16 {
                    let c = match curve {
                        Curve::Morton => morton_code([x, y, z], 4),
                        Curve::Hilbert => hilbert_code([x, y, z], 4),
                    }
                    .unwrap();
                    assert!(c < 4096);
                    assert!(seen.insert(c));
                }
            }
        }
        assert_eq!(seen.len(), 4096);
    }
}

#[test]
fn hilbert_steps_are_unit_moves() {
    let mut by_code = vec![[0u32; 3]; 4096];
    for z in 0..16 {
        for y in 0..16 {
            for x in 0..16 {
                by_code[hilbert_code([x, y, z], 4).unwrap() as usize] = [x, y, z];
            }
        }
    }
    for w in by_code.windows(2) {
        let l1: u32 = (0..3).map(|k| w[0][k].abs_diff(w[1][k])).sum();
        assert_eq!(l1, 1, "{:?} -> {:?}", w[0], w[1]);
    }
}

#[test]
fn bits_cover_dims() {
    assert_eq!(bits_for_dims([1, 1, 1]), 1);
    assert_eq!(bits_for_dims([200, 200, 16]), 8);
    assert_eq!(bits_for_dims([256, 3, 3]), 8);
    assert_eq!(bits_for_dims([257, 3, 3]), 9);
}

#[test]
fn serialization_orders_and_windows() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let dims = [20, 7, 3];
    let pts: Vec<[u32; 3]> = (0..300)
        .map(|_| std::array::from_fn(|k| rng.gen_range(0..dims[k])))
        .collect();
    let s = PointStream::new(dims, pts, 0).unwrap();
    for curve in [Curve::Morton, Curve::Hilbert] {
        let order = serialize(&s, curve);
        assert!(order.is_bijection());
        let inv = order.inverse();
        for (k, &p) in order.permutation.iter().enumerate() {
            assert_eq!(inv[p], k);
        }
        let w = windows(&order, 64).unwrap();
        assert_eq!(w.len(), 5);
        assert_eq!(w.last().unwrap().clone(), 256..300);
    }
}

#[test]
fn regroup_roundtrip_with_empty_and_duplicate_points() {
    let dims = [8, 8, 8];
    let a = PointStream::new(dims, vec![], 0).unwrap();
    let b = PointStream::with_payload(dims, vec![[1, 1, 1], [1, 1, 1], [0, 7, 2]], 3, vec![10, 11, 12]).unwrap();
    let streams = [a, b];
    let r = smsa_regroup(&streams, Curve::Hilbert, 2).unwrap();
    let back = r
        .split_streams(&r.merged_indices(&streams), &r.merged_payload(&streams))
        .unwrap();
    assert_eq!(back, streams);
    assert!(smsa_regroup(&streams, Curve::Morton, 0).is_err());
}
