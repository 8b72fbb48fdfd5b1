//! On-disk formats. All binary formats are little-endian.
//!
//! | magic  | contents                                                        |
//! |--------|-----------------------------------------------------------------|
//! | `OV4D` | panoptic sequence: header, per-frame u16 semantics, u32          |
//! |        | instances, bit-packed visibility, JSON trailer                   |
//! | `GSET` | Gaussian set: per Gaussian f32 center, scale, quaternion (w,x,y,z), |
//! |        | opacity, embedding                                               |
//! | `QOUT` | raw query outputs for one frame                                  |
//! | `FGRD` | splatted feature grid                                            |
//!
//! `OV4D` header: magic, version (1), dims (3×u32), class count, frame
//! count, all u32. Each frame holds `N` u16 semantics, `N` u32 instances and
//! `ceil(N/8)` visibility bytes, voxel `v` at bit `v % 8` of byte `v / 8`,
//! x fastest. A u32 byte length and a UTF-8 JSON object follow, holding the
//! label spec, the metric origin and voxel size, and the frame timestamps.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridGeometry, LabelSpec, PanopticGrid, TrackedSequence};
use crate::infer::{QueryKind, QueryOutput};
use crate::splat::{FeatureGrid, Gaussian, GaussianSet};

pub const OV4D_MAGIC: &[u8; 4] = b"OV4D";
pub const GSET_MAGIC: &[u8; 4] = b"GSET";
pub const QOUT_MAGIC: &[u8; 4] = b"QOUT";
pub const FGRD_MAGIC: &[u8; 4] = b"FGRD";
pub const VERSION: u32 = 1;

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Bounds-checked little-endian reader that reports byte offsets.
struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a str,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8], path: &'a str) -> Self {
        Self { bytes, pos: 0, path }
    }

    fn fail(&self, message: impl Into<String>) -> Error {
        Error::format(self.path, self.pos as u64, message)
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let left = self.bytes.len() - self.pos;
        if n > left {
            return Err(self.fail(format!(
                "truncated {what}: expected {n} bytes, found {left} (file is {} bytes)",
                self.bytes.len()
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn magic(&mut self, magic: &[u8; 4]) -> Result<()> {
        let got = self.take(4, "magic")?;
        if got != magic {
            self.pos -= 4;
            return Err(self.fail(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(got),
                String::from_utf8_lossy(magic)
            )));
        }
        let version = self.u32("version")?;
        if version != VERSION {
            self.pos -= 4;
            return Err(self.fail(format!("unsupported version {version}, expected {VERSION}")));
        }
        Ok(())
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    /// Checks that `count` items of `width` bytes are all present.
    fn block(&mut self, count: usize, width: usize, what: &str) -> Result<&'a [u8]> {
        let n = count
            .checked_mul(width)
            .ok_or_else(|| self.fail(format!("{what} size overflows")))?;
        self.take(n, what)
    }

    fn f32s(&mut self, count: usize, what: &str) -> Result<Vec<f32>> {
        Ok(self
            .block(count, 4, what)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect())
    }

    fn u32s(&mut self, count: usize, what: &str) -> Result<Vec<u32>> {
        Ok(self
            .block(count, 4, what)?
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect())
    }

    fn finish(&self) -> Result<()> {
        let extra = self.bytes.len() - self.pos;
        if extra != 0 {
            return Err(self.fail(format!("{extra} trailing bytes after payload")));
        }
        Ok(())
    }
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f32(out: &mut Vec<u8>, v: f32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn header(out: &mut Vec<u8>, magic: &[u8; 4]) {
    out.extend_from_slice(magic);
    put_u32(out, VERSION);
}

#[derive(Debug, Serialize, Deserialize)]
struct Ov4dTrailer {
    labels: LabelSpec,
    origin: [f64; 3],
    voxel_size: [f64; 3],
    timestamps: Vec<i64>,
}

pub fn encode_ov4d(seq: &TrackedSequence) -> Vec<u8> {
    let geom = seq.geometry();
    let n = geom.num_voxels();
    let per_frame = n * 6 + n.div_ceil(8);
    let mut out = Vec::with_capacity(28 + per_frame * seq.len() + 512);
    header(&mut out, OV4D_MAGIC);
    for d in geom.dims {
        put_u32(&mut out, d);
    }
    put_u32(&mut out, seq.spec().num_classes() as u32);
    put_u32(&mut out, seq.len() as u32);
    for f in seq.frames() {
        for &s in f.semantics() {
            out.extend_from_slice(&s.to_le_bytes());
        }
        for &i in f.instances() {
            out.extend_from_slice(&i.to_le_bytes());
        }
        let mut packed = vec![0u8; n.div_ceil(8)];
        for (v, &vis) in f.visibility().iter().enumerate() {
            if vis {
                packed[v / 8] |= 1 << (v % 8);
            }
        }
        out.extend_from_slice(&packed);
    }
    let trailer = Ov4dTrailer {
        labels: seq.spec().clone(),
        origin: geom.origin,
        voxel_size: geom.voxel_size,
        timestamps: seq.timestamps().to_vec(),
    };
    let text = serde_json::to_vec(&trailer).expect("trailer serializes");
    put_u32(&mut out, text.len() as u32);
    out.extend_from_slice(&text);
    out
}

pub fn decode_ov4d(bytes: &[u8], path: &str) -> Result<TrackedSequence> {
    let mut r = Reader::new(bytes, path);
    r.magic(OV4D_MAGIC)?;
    let dims = [r.u32("dims")?, r.u32("dims")?, r.u32("dims")?];
    if dims.contains(&0) {
        r.pos -= 12;
        return Err(r.fail(format!("zero grid dimension {dims:?}")));
    }
    let classes = r.u32("class count")? as usize;
    let frames = r.u32("frame count")? as usize;
    let n = dims.iter().map(|&d| d as usize).product::<usize>();

    let frame_bytes = n * 6 + n.div_ceil(8);
    let needed = frame_bytes
        .checked_mul(frames)
        .ok_or_else(|| r.fail("frame payload size overflows"))?;
    let left = bytes.len() - r.pos;
    if needed > left {
        return Err(r.fail(format!(
            "truncated frame payload: {frames} frames of {dims:?} need {needed} bytes, found {left}"
        )));
    }

    let mut raw = Vec::with_capacity(frames);
    for _ in 0..frames {
        let semantics: Vec<u16> = r
            .block(n, 2, "semantics")?
            .chunks_exact(2)
            .map(|c| u16::from_le_bytes([c[0], c[1]]))
            .collect();
        let instances = r.u32s(n, "instances")?;
        let packed = r.block(n.div_ceil(8), 1, "visibility")?;
        let visibility = (0..n).map(|v| packed[v / 8] >> (v % 8) & 1 == 1).collect();
        raw.push((semantics, instances, visibility));
    }

    let len = r.u32("trailer length")? as usize;
    let trailer_at = r.pos as u64;
    let text = r.take(len, "trailer")?;
    r.finish()?;
    let trailer: Ov4dTrailer = serde_json::from_slice(text)
        .map_err(|e| Error::format(path, trailer_at, format!("bad trailer: {e}")))?;
    if trailer.labels.num_classes() != classes {
        return Err(Error::format(
            path,
            trailer_at,
            format!(
                "trailer lists {} classes, header says {classes}",
                trailer.labels.num_classes()
            ),
        ));
    }
    let geom = GridGeometry::new(trailer.origin, trailer.voxel_size, dims)
        .map_err(|e| Error::format(path, trailer_at, e.to_string()))?;
    let grids = raw
        .into_iter()
        .map(|(s, i, v)| PanopticGrid::new(geom, s, i, v))
        .collect::<Result<Vec<_>>>()?;
    TrackedSequence::new(trailer.labels, geom, grids, trailer.timestamps)
        .map_err(|e| Error::format(path, trailer_at, e.to_string()))
}

pub fn read_ov4d(path: &Path) -> Result<TrackedSequence> {
    decode_ov4d(&read_file(path)?, &path.display().to_string())
}

pub fn write_ov4d(path: &Path, seq: &TrackedSequence) -> Result<()> {
    write_file(path, &encode_ov4d(seq))
}

pub fn encode_gset(set: &GaussianSet) -> Vec<u8> {
    let mut out = Vec::new();
    header(&mut out, GSET_MAGIC);
    put_u32(&mut out, set.len() as u32);
    put_u32(&mut out, set.embedding_dim() as u32);
    for g in set.gaussians() {
        for v in g
            .center
            .iter()
            .chain(&g.scale)
            .chain(&g.rotation)
            .chain(std::iter::once(&g.opacity))
            .chain(&g.embedding)
        {
            put_f32(&mut out, *v as f32);
        }
    }
    out
}

/// Quaternions are renormalised after the f32 round trip.
pub fn decode_gset(bytes: &[u8], path: &str) -> Result<GaussianSet> {
    let mut r = Reader::new(bytes, path);
    r.magic(GSET_MAGIC)?;
    let count = r.u32("gaussian count")? as usize;
    let dim = r.u32("embedding dim")? as usize;
    let stride = 11 + dim;
    let body_at = r.pos as u64;
    let values = r.f32s(count * stride, "gaussian records")?;
    r.finish()?;
    let gaussians = values
        .chunks_exact(stride)
        .map(|c| {
            let c: Vec<f64> = c.iter().map(|&v| v as f64).collect();
            let mut q = [c[6], c[7], c[8], c[9]];
            let norm = q.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                q = q.map(|v| v / norm);
            }
            Gaussian {
                center: [c[0], c[1], c[2]],
                scale: [c[3], c[4], c[5]],
                rotation: q,
                opacity: c[10],
                embedding: c[11..].to_vec(),
            }
        })
        .collect();
    GaussianSet::new(gaussians, dim).map_err(|e| match e {
        Error::Shape(_) => e,
        other => Error::format(path, body_at, other.to_string()),
    })
}

pub fn read_gset(path: &Path) -> Result<GaussianSet> {
    decode_gset(&read_file(path)?, &path.display().to_string())
}

pub fn write_gset(path: &Path, set: &GaussianSet) -> Result<()> {
    write_file(path, &encode_gset(set))
}

/// Header: magic, version, query count Q, class count C, dims (3×u32). Body:
/// Q×C f32 class scores, Q kind bytes (0 stuff, 1 instance), Q u32 track
/// IDs, Q×N f32 mask scores.
pub fn encode_qout(out: &QueryOutput) -> Vec<u8> {
    let mut b = Vec::new();
    header(&mut b, QOUT_MAGIC);
    put_u32(&mut b, out.num_queries() as u32);
    put_u32(&mut b, out.num_classes() as u32);
    for d in out.dims() {
        put_u32(&mut b, d);
    }
    for &s in out.all_class_scores() {
        put_f32(&mut b, s);
    }
    for k in out.kinds() {
        b.push(match k {
            QueryKind::Stuff => 0,
            QueryKind::Instance => 1,
        });
    }
    for &t in out.track_ids() {
        put_u32(&mut b, t);
    }
    for &m in out.all_mask_scores() {
        put_f32(&mut b, m);
    }
    b
}

pub fn decode_qout(bytes: &[u8], path: &str) -> Result<QueryOutput> {
    let mut r = Reader::new(bytes, path);
    r.magic(QOUT_MAGIC)?;
    let q = r.u32("query count")? as usize;
    let c = r.u32("class count")? as usize;
    let dims = [r.u32("dims")?, r.u32("dims")?, r.u32("dims")?];
    let n = dims.iter().map(|&d| d as usize).product::<usize>();
    let scores = r.f32s(q * c, "class scores")?;
    let kinds_at = r.pos;
    let kinds = r
        .block(q, 1, "query kinds")?
        .iter()
        .enumerate()
        .map(|(i, &k)| match k {
            0 => Ok(QueryKind::Stuff),
            1 => Ok(QueryKind::Instance),
            other => Err(Error::format(path, (kinds_at + i) as u64, format!("bad query kind {other}"))),
        })
        .collect::<Result<Vec<_>>>()?;
    let tracks = r.u32s(q, "track IDs")?;
    let masks = r.f32s(q * n, "mask scores")?;
    r.finish()?;
    QueryOutput::new(dims, c, scores, kinds, tracks, masks)
}

pub fn read_qout(path: &Path) -> Result<QueryOutput> {
    decode_qout(&read_file(path)?, &path.display().to_string())
}

pub fn write_qout(path: &Path, out: &QueryOutput) -> Result<()> {
    write_file(path, &encode_qout(out))
}

/// Header: magic, version, dims (3×u32), embedding dim C (u32), origin and
/// voxel size (6×f32). Body: N f32 occupancies, then N×C f32 features.
pub fn encode_fgrd(grid: &FeatureGrid) -> Vec<u8> {
    let g = grid.geometry();
    let mut b = Vec::with_capacity(40 + 4 * (grid.occupancy().len() + grid.features().len()));
    header(&mut b, FGRD_MAGIC);
    for d in g.dims {
        put_u32(&mut b, d);
    }
    put_u32(&mut b, grid.embedding_dim() as u32);
    for v in g.origin.iter().chain(&g.voxel_size) {
        put_f32(&mut b, *v as f32);
    }
    for &o in grid.occupancy() {
        put_f32(&mut b, o as f32);
    }
    for &f in grid.features() {
        put_f32(&mut b, f as f32);
    }
    b
}

pub fn decode_fgrd(bytes: &[u8], path: &str) -> Result<FeatureGrid> {
    let mut r = Reader::new(bytes, path);
    r.magic(FGRD_MAGIC)?;
    let dims = [r.u32("dims")?, r.u32("dims")?, r.u32("dims")?];
    let c = r.u32("embedding dim")? as usize;
    let meta = r.f32s(6, "geometry")?;
    let geom = GridGeometry::new(
        [meta[0] as f64, meta[1] as f64, meta[2] as f64],
        [meta[3] as f64, meta[4] as f64, meta[5] as f64],
        dims,
    )
    .map_err(|e| r.fail(e.to_string()))?;
    let n = geom.num_voxels();
    let occ = r.f32s(n, "occupancy")?;
    let feat = r.f32s(n * c, "features")?;
    r.finish()?;
    FeatureGrid::new(
        geom,
        c,
        occ.into_iter().map(f64::from).collect(),
        feat.into_iter().map(f64::from).collect(),
    )
}

#[derive(Debug, Serialize, Deserialize)]
struct EmbeddingRecord {
    frame: usize,
    instance_id: u32,
    embedding: Vec<f64>,
}

/// Per-frame instance embeddings from JSON lines
/// `{"frame": t, "instance_id": i, "embedding": [...]}`.
pub fn read_embeddings(path: &Path, frames: usize) -> Result<Vec<BTreeMap<u32, Vec<f64>>>> {
    let p = path.display().to_string();
    let text = String::from_utf8(read_file(path)?)
        .map_err(|e| Error::Parse { path: p.clone(), message: e.to_string() })?;
    let mut out = vec![BTreeMap::new(); frames];
    for (n, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let rec: EmbeddingRecord = serde_json::from_str(t).map_err(|e| Error::Parse {
            path: p.clone(),
            message: format!("line {}: {e}", n + 1),
        })?;
        let slot = out.get_mut(rec.frame).ok_or_else(|| {
            Error::Shape(format!("{p} line {}: frame {} of {frames}", n + 1, rec.frame))
        })?;
        slot.insert(rec.instance_id, rec.embedding);
    }
    Ok(out)
}

pub fn write_embeddings(path: &Path, embeddings: &[BTreeMap<u32, Vec<f64>>]) -> Result<()> {
    let mut text = String::new();
    for (frame, m) in embeddings.iter().enumerate() {
        for (&instance_id, e) in m {
            let rec = EmbeddingRecord {
                frame,
                instance_id,
                embedding: e.clone(),
            };
            text.push_str(&serde_json::to_string(&rec).expect("record serializes"));
            text.push('\n');
        }
    }
    write_file(path, text.as_bytes())
}
