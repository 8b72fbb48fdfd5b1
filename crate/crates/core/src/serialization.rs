//! Space-filling-curve serialization of sparse voxel points.
//!
//! Seed points are drawn from a feature grid, ordered along a Morton or
//! Hilbert curve and cut into fixed-size windows. [`smsa_regroup`] merges
//! several point streams, orders them jointly, windows the unified order and
//! keeps enough bookkeeping to split results back into the original streams.

use std::cmp::Ordering;
use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::splat::FeatureGrid;

/// Widest per-axis code supported, so three axes fit in a `u64`.
pub const MAX_BITS: u32 = 21;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Curve {
    Morton,
    #[default]
    Hilbert,
}

fn check_coords(index: [u32; 3], bits: u32) -> Result<()> {
    if bits > MAX_BITS {
        return Err(Error::Range(format!("{bits} bits per axis exceeds {MAX_BITS}")));
    }
    if index.iter().any(|&c| bits < 32 && c >> bits != 0) {
        return Err(Error::Range(format!(
            "coordinate {index:?} does not fit in {bits} bits"
        )));
    }
    Ok(())
}

/// Spread the low 21 bits of `v` so bit b lands at bit 3b.
fn spread(v: u32) -> u64 {
    let mut x = v as u64 & 0x1f_ffff;
    x = (x | (x << 32)) & 0x001f_0000_0000_ffff;
    x = (x | (x << 16)) & 0x001f_0000_ff00_00ff;
    x = (x | (x << 8)) & 0x100f_00f0_0f00_f00f;
    x = (x | (x << 4)) & 0x10c3_0c30_c30c_30c3;
    x = (x | (x << 2)) & 0x1249_2492_4924_9249;
    x
}

/// Z-order code: bit 3b is x_b, 3b+1 is y_b, 3b+2 is z_b.
pub fn morton_code(index: [u32; 3], bits: u32) -> Result<u64> {
    check_coords(index, bits)?;
    Ok(spread(index[0]) | spread(index[1]) << 1 | spread(index[2]) << 2)
}

/// Position of `index` along the 3D Hilbert curve over the `2^bits` cube.
///
/// Uses Skilling's transpose form: the coordinates are transformed in place
/// into the "transposed" Hilbert index, which is then bit-interleaved with
/// x as the most significant axis.
pub fn hilbert_code(index: [u32; 3], bits: u32) -> Result<u64> {
    check_coords(index, bits)?;
    if bits == 0 {
        return Ok(0);
    }
    let mut x = index;
    let m = 1u32 << (bits - 1);

    // Inverse undo
    let mut q = m;
    while q > 1 {
        let p = q - 1;
        for i in 0..3 {
            if x[i] & q != 0 {
                x[0] ^= p;
            } else {
                let t = (x[0] ^ x[i]) & p;
                x[0] ^= t;
                x[i] ^= t;
            }
        }
        q >>= 1;
    }

    // Gray encode
    for i in 1..3 {
        x[i] ^= x[i - 1];
    }
    let mut t = 0;
    let mut q = m;
    while q > 1 {
        if x[2] & q != 0 {
            t ^= q - 1;
        }
        q >>= 1;
    }
    for v in x.iter_mut() {
        *v ^= t;
    }

    let mut code = 0u64;
    for b in (0..bits).rev() {
        for v in x {
            code = (code << 1) | ((v >> b) & 1) as u64;
        }
    }
    Ok(code)
}

pub fn curve_code(curve: Curve, index: [u32; 3], bits: u32) -> Result<u64> {
    match curve {
        Curve::Morton => morton_code(index, bits),
        Curve::Hilbert => hilbert_code(index, bits),
    }
}

/// `ceil(log2(max dim))`, at least 1.
pub fn bits_for_dims(dims: [u32; 3]) -> u32 {
    let max = dims.iter().copied().max().unwrap_or(1).max(2);
    32 - (max - 1).leading_zeros()
}

/// Sparse voxel points of one stream, with opaque per-point handles that
/// travel through every permutation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PointStream {
    pub dims: [u32; 3],
    pub indices: Vec<[u32; 3]>,
    pub stream_id: u16,
    pub payload_refs: Vec<u64>,
}

impl PointStream {
    /// Payload refs default to the point positions.
    pub fn new(dims: [u32; 3], indices: Vec<[u32; 3]>, stream_id: u16) -> Result<Self> {
        let refs = (0..indices.len() as u64).collect();
        Self::with_payload(dims, indices, stream_id, refs)
    }

    pub fn with_payload(
        dims: [u32; 3],
        indices: Vec<[u32; 3]>,
        stream_id: u16,
        payload_refs: Vec<u64>,
    ) -> Result<Self> {
        if payload_refs.len() != indices.len() {
            return Err(Error::Shape(format!(
                "{} payload refs for {} points",
                payload_refs.len(),
                indices.len()
            )));
        }
        if let Some(p) = indices
            .iter()
            .find(|p| p.iter().zip(&dims).any(|(c, d)| c >= d))
        {
            return Err(Error::Range(format!("point {p:?} outside dims {dims:?}")));
        }
        Ok(Self {
            dims,
            indices,
            stream_id,
            payload_refs,
        })
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// `permutation[k]` is the original position of the k-th point in curve order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SerializationOrder {
    pub curve: Curve,
    pub permutation: Vec<usize>,
}

impl SerializationOrder {
    pub fn len(&self) -> usize {
        self.permutation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.permutation.is_empty()
    }

    /// `inverse()[original] = serialized position`.
    pub fn inverse(&self) -> Vec<usize> {
        let mut inv = vec![0; self.permutation.len()];
        for (k, &p) in self.permutation.iter().enumerate() {
            inv[p] = k;
        }
        inv
    }

    pub fn is_bijection(&self) -> bool {
        let mut seen = vec![false; self.permutation.len()];
        self.permutation
            .iter()
            .all(|&p| p < seen.len() && !std::mem::replace(&mut seen[p], true))
    }

    pub fn apply<T: Clone>(&self, items: &[T]) -> Vec<T> {
        self.permutation.iter().map(|&p| items[p].clone()).collect()
    }
}

/// Draws up to `k` distinct voxels with probability proportional to feature
/// norm, without replacement.
///
/// Uses exponential keys `ln(u)/w`, keeping the `k` largest; this is
/// equivalent to sequential weighted draws without replacement. Voxels with
/// zero norm are never drawn. Points are returned in ascending voxel order.
pub fn seed_points(grid: &FeatureGrid, k: i64, seed: u64) -> Result<PointStream> {
    if k <= 0 {
        return Err(Error::Argument(format!("k must be positive, got {k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keyed: Vec<(f64, usize)> = Vec::new();
    for v in 0..grid.geometry().num_voxels() {
        let w = grid.feature_norm(v);
        if w > 0.0 {
            let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
            keyed.push((u.ln() / w, v));
        }
    }
    let k = (k as usize).min(keyed.len());
    if k < keyed.len() {
        keyed.select_nth_unstable_by(k, |a, b| b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal));
        keyed.truncate(k);
    }
    let mut chosen: Vec<usize> = keyed.into_iter().map(|(_, v)| v).collect();
    chosen.sort_unstable();
    let geom = grid.geometry();
    let indices = chosen.iter().map(|&v| geom.unlinear(v)).collect();
    let refs = chosen.iter().map(|&v| v as u64).collect();
    PointStream::with_payload(geom.dims, indices, 0, refs)
}

fn order_indices(indices: &[[u32; 3]], bits: u32, curve: Curve) -> Result<Vec<usize>> {
    let codes = indices
        .iter()
        .map(|&i| curve_code(curve, i, bits))
        .collect::<Result<Vec<_>>>()?;
    let mut perm: Vec<usize> = (0..indices.len()).collect();
    // stable: duplicate indices keep their original order
    perm.sort_by_key(|&p| codes[p]);
    Ok(perm)
}

/// Orders points by ascending curve code; ties keep input order.
pub fn serialize(stream: &PointStream, curve: Curve) -> SerializationOrder {
    let bits = bits_for_dims(stream.dims);
    let permutation = order_indices(&stream.indices, bits, curve)
        .expect("stream points are validated against dims");
    SerializationOrder { curve, permutation }
}

/// Consecutive chunks of `window` points along the serialized order.
pub fn windows(order: &SerializationOrder, window: usize) -> Result<Vec<Range<usize>>> {
    if window == 0 {
        return Err(Error::Argument("window size must be at least 1".into()));
    }
    let n = order.len();
    Ok((0..n).step_by(window).map(|s| s..(s + window).min(n)).collect())
}

/// Point provenance: which stream, and which position inside it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Origin {
    pub stream: usize,
    pub position: usize,
}

/// Result of jointly serializing several streams.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Regrouped {
    pub curve: Curve,
    /// Merged points in unified curve order.
    pub origins: Vec<Origin>,
    /// Windows over `origins`.
    pub windows: Vec<Range<usize>>,
    stream_lens: Vec<usize>,
    dims: [u32; 3],
    stream_ids: Vec<u16>,
}

impl Regrouped {
    /// Unified-order point indices.
    pub fn merged_indices(&self, streams: &[PointStream]) -> Vec<[u32; 3]> {
        self.origins
            .iter()
            .map(|o| streams[o.stream].indices[o.position])
            .collect()
    }

    /// Unified-order payload refs.
    pub fn merged_payload(&self, streams: &[PointStream]) -> Vec<u64> {
        self.origins
            .iter()
            .map(|o| streams[o.stream].payload_refs[o.position])
            .collect()
    }

    /// Scatters per-point values given in unified order back into one vector
    /// per original stream, each in its original point order.
    pub fn split_back<T: Clone>(&self, unified: &[T]) -> Result<Vec<Vec<T>>> {
        if unified.len() != self.origins.len() {
            return Err(Error::Shape(format!(
                "{} values for {} merged points",
                unified.len(),
                self.origins.len()
            )));
        }
        let mut out: Vec<Vec<Option<T>>> =
            self.stream_lens.iter().map(|&n| vec![None; n]).collect();
        for (o, v) in self.origins.iter().zip(unified) {
            out[o.stream][o.position] = Some(v.clone());
        }
        Ok(out
            .into_iter()
            .map(|s| s.into_iter().map(|v| v.expect("origins cover every point")).collect())
            .collect())
    }

    /// Rebuilds the input streams from unified-order indices and payloads.
    pub fn split_streams(&self, indices: &[[u32; 3]], payload: &[u64]) -> Result<Vec<PointStream>> {
        let idx = self.split_back(indices)?;
        let refs = self.split_back(payload)?;
        idx.into_iter()
            .zip(refs)
            .zip(&self.stream_ids)
            .map(|((i, r), &id)| PointStream::with_payload(self.dims, i, id, r))
            .collect()
    }
}

/// Merges all streams, serializes the union along one curve, windows it and
/// records where every point came from.
pub fn smsa_regroup(streams: &[PointStream], curve: Curve, window: usize) -> Result<Regrouped> {
    if window == 0 {
        return Err(Error::Argument("window size must be at least 1".into()));
    }
    let dims = streams.first().map(|s| s.dims).unwrap_or([1, 1, 1]);
    if let Some(s) = streams.iter().position(|s| s.dims != dims) {
        return Err(Error::Shape(format!("stream {s} uses a different geometry")));
    }
    let mut origins = Vec::new();
    let mut indices = Vec::new();
    for (s, stream) in streams.iter().enumerate() {
        for (position, &i) in stream.indices.iter().enumerate() {
            origins.push(Origin { stream: s, position });
            indices.push(i);
        }
    }
    let perm = order_indices(&indices, bits_for_dims(dims), curve)?;
    let origins: Vec<Origin> = perm.iter().map(|&p| origins[p]).collect();
    let n = origins.len();
    let windows = (0..n).step_by(window).map(|s| s..(s + window).min(n)).collect();
    Ok(Regrouped {
        curve,
        origins,
        windows,
        stream_lens: streams.iter().map(|s| s.len()).collect(),
        dims,
        stream_ids: streams.iter().map(|s| s.stream_id).collect(),
    })
}
