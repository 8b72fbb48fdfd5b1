//! Gaussian-to-voxel occupancy and feature splatting.
//!
//! Occupancy at a point combines every Gaussian's unnormalised kernel,
//!
//! ```text
//! o(x) = 1 - prod_j (1 - exp(-0.5 * d_j(x)^2))
//! ```
//!
//! with `d_j` the Mahalanobis distance to Gaussian `j`. Features are the
//! opacity- and density-weighted mean embedding scaled by occupancy,
//!
//! ```text
//! f(x) = o(x) * sum_j a_j G_j(x) e_j / sum_j a_j G_j(x)
//! ```
//!
//! where `G_j` is the normalised 3D Gaussian density.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::GridGeometry;

/// Smallest per-axis standard deviation accepted, in meters.
pub const SCALE_FLOOR: f64 = 1e-3;

/// Feature denominators below this yield a zero feature.
pub const DENOM_FLOOR: f64 = 1e-12;

pub const DEFAULT_TRUNCATION_SIGMA: f64 = 3.0;

const QUAT_TOLERANCE: f64 = 1e-6;

/// (2π)^(-3/2)
const NORMALIZER: f64 = 0.063_493_635_934_240_97;

type Mat3 = [[f64; 3]; 3];

#[derive(Debug, Clone, PartialEq)]
pub struct Gaussian {
    pub center: [f64; 3],
    /// Per-axis standard deviations before rotation.
    pub scale: [f64; 3],
    /// Unit quaternion `(w, x, y, z)`.
    pub rotation: [f64; 4],
    pub opacity: f64,
    pub embedding: Vec<f64>,
}

impl Gaussian {
    pub fn isotropic(center: [f64; 3], sigma: f64, opacity: f64, embedding: Vec<f64>) -> Self {
        Self {
            center,
            scale: [sigma; 3],
            rotation: [1.0, 0.0, 0.0, 0.0],
            opacity,
            embedding,
        }
    }

    pub fn check(&self) -> Result<()> {
        let finite = self
            .center
            .iter()
            .chain(&self.scale)
            .chain(&self.rotation)
            .chain(std::iter::once(&self.opacity))
            .chain(&self.embedding)
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Numeric("gaussian has non-finite parameters".into()));
        }
        if let Some(s) = self.scale.iter().find(|&&s| s < SCALE_FLOOR) {
            return Err(Error::Argument(format!("scale {s} below floor {SCALE_FLOOR}")));
        }
        let norm = self.rotation.iter().map(|q| q * q).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > QUAT_TOLERANCE {
            return Err(Error::Argument(format!("quaternion norm {norm} is not 1")));
        }
        if !(self.opacity > 0.0 && self.opacity <= 1.0) {
            return Err(Error::Argument(format!("opacity {} outside (0, 1]", self.opacity)));
        }
        Ok(())
    }

    fn rotation_matrix(&self) -> Mat3 {
        let [w, x, y, z] = self.rotation;
        [
            [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
            [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
            [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
        ]
    }

    /// Σ = R diag(s²) Rᵀ
    pub fn covariance(&self) -> Mat3 {
        let r = self.rotation_matrix();
        let d = self.scale.map(|s| s * s);
        std::array::from_fn(|i| {
            std::array::from_fn(|j| (0..3).map(|k| r[i][k] * d[k] * r[j][k]).sum())
        })
    }
}

/// Per-Gaussian quantities derived once and reused for every evaluation.
#[derive(Debug, Clone)]
struct Prepared {
    center: [f64; 3],
    precision: Mat3,
    /// Standard deviation of the marginal along each world axis.
    marginal_sigma: [f64; 3],
    /// opacity · (2π)^(-3/2) |Σ|^(-1/2)
    weight_scale: f64,
}

impl Prepared {
    fn new(g: &Gaussian) -> Self {
        let r = g.rotation_matrix();
        let inv = g.scale.map(|s| 1.0 / (s * s));
        let precision = std::array::from_fn(|i| {
            std::array::from_fn(|j| (0..3).map(|k| r[i][k] * inv[k] * r[j][k]).sum())
        });
        let cov = g.covariance();
        let det_sqrt = g.scale.iter().product::<f64>();
        Self {
            center: g.center,
            precision,
            marginal_sigma: std::array::from_fn(|k| cov[k][k].sqrt()),
            weight_scale: g.opacity * NORMALIZER / det_sqrt,
        }
    }

    fn mahalanobis_sq(&self, x: [f64; 3]) -> f64 {
        let d = [x[0] - self.center[0], x[1] - self.center[1], x[2] - self.center[2]];
        let p = &self.precision;
        d[0] * d[0] * p[0][0]
            + d[1] * d[1] * p[1][1]
            + d[2] * d[2] * p[2][2]
            + 2.0 * (d[0] * d[1] * p[0][1] + d[0] * d[2] * p[0][2] + d[1] * d[2] * p[1][2])
    }
}

/// Normalised density N(x | μ, Σ).
pub fn gaussian_pdf(g: &Gaussian, x: [f64; 3]) -> Result<f64> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("evaluation point {x:?}")));
    }
    g.check()?;
    let p = Prepared::new(g);
    Ok(NORMALIZER / g.scale.iter().product::<f64>() * (-0.5 * p.mahalanobis_sq(x)).exp())
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GaussianSet {
    gaussians: Vec<Gaussian>,
    embedding_dim: usize,
}

impl GaussianSet {
    pub fn new(gaussians: Vec<Gaussian>, embedding_dim: usize) -> Result<Self> {
        if embedding_dim == 0 {
            return Err(Error::Argument("embedding dim must be positive".into()));
        }
        for (j, g) in gaussians.iter().enumerate() {
            if g.embedding.len() != embedding_dim {
                return Err(Error::Shape(format!(
                    "gaussian {j} has embedding dim {}, expected {embedding_dim}",
                    g.embedding.len()
                )));
            }
            g.check()
                .map_err(|e| Error::Argument(format!("gaussian {j}: {e}")))?;
        }
        Ok(Self {
            gaussians,
            embedding_dim,
        })
    }

    pub fn empty(embedding_dim: usize) -> Result<Self> {
        Self::new(Vec::new(), embedding_dim)
    }

    pub fn gaussians(&self) -> &[Gaussian] {
        &self.gaussians
    }

    pub fn embedding_dim(&self) -> usize {
        self.embedding_dim
    }

    pub fn len(&self) -> usize {
        self.gaussians.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gaussians.is_empty()
    }

    fn prepare(&self) -> Vec<Prepared> {
        self.gaussians.iter().map(Prepared::new).collect()
    }
}

/// Concatenates streams in order, stream 0 first.
pub fn merge_streams(sets: &[GaussianSet]) -> Result<GaussianSet> {
    let Some(first) = sets.first() else {
        return Err(Error::Argument("no streams to merge".into()));
    };
    let dim = first.embedding_dim;
    if let Some(s) = sets.iter().position(|s| s.embedding_dim != dim) {
        return Err(Error::Shape(format!(
            "stream {s} has embedding dim {}, stream 0 has {dim}",
            sets[s].embedding_dim
        )));
    }
    Ok(GaussianSet {
        gaussians: sets.iter().flat_map(|s| s.gaussians.iter().cloned()).collect(),
        embedding_dim: dim,
    })
}

/// Running per-voxel sums, fed Gaussians in ascending index order.
struct Accumulator<'a> {
    free_product: f64,
    weight: f64,
    feature: &'a mut [f64],
}

impl<'a> Accumulator<'a> {
    fn new(feature: &'a mut [f64]) -> Self {
        feature.fill(0.0);
        Self {
            free_product: 1.0,
            weight: 0.0,
            feature,
        }
    }

    fn add(&mut self, p: &Prepared, embedding: &[f64], x: [f64; 3]) {
        let kernel = (-0.5 * p.mahalanobis_sq(x)).exp();
        self.free_product *= 1.0 - kernel;
        let w = p.weight_scale * kernel;
        self.weight += w;
        for (f, e) in self.feature.iter_mut().zip(embedding) {
            *f += w * e;
        }
    }

    /// Returns occupancy; leaves the final feature in place.
    fn finish(self) -> f64 {
        let occupancy = 1.0 - self.free_product;
        if self.weight < DENOM_FLOOR || occupancy == 0.0 {
            self.feature.fill(0.0);
        } else {
            let s = occupancy / self.weight;
            for f in self.feature.iter_mut() {
                *f *= s;
            }
        }
        occupancy
    }
}

pub fn occupancy_at(set: &GaussianSet, x: [f64; 3]) -> f64 {
    let mut free = 1.0;
    for g in set.prepare() {
        free *= 1.0 - (-0.5 * g.mahalanobis_sq(x)).exp();
    }
    1.0 - free
}

pub fn feature_at(set: &GaussianSet, x: [f64; 3]) -> Vec<f64> {
    let mut feature = vec![0.0; set.embedding_dim];
    let mut acc = Accumulator::new(&mut feature);
    for (p, g) in set.prepare().iter().zip(&set.gaussians) {
        acc.add(p, &g.embedding, x);
    }
    acc.finish();
    feature
}

/// Dense per-voxel occupancy and features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGrid {
    geometry: GridGeometry,
    embedding_dim: usize,
    occupancy: Vec<f64>,
    features: Vec<f64>,
}

impl FeatureGrid {
    pub fn new(
        geometry: GridGeometry,
        embedding_dim: usize,
        occupancy: Vec<f64>,
        features: Vec<f64>,
    ) -> Result<Self> {
        let n = geometry.num_voxels();
        if occupancy.len() != n || features.len() != n * embedding_dim {
            return Err(Error::Shape(format!(
                "feature grid needs {n} occupancies and {} features, got {} and {}",
                n * embedding_dim,
                occupancy.len(),
                features.len()
            )));
        }
        Ok(Self {
            geometry,
            embedding_dim,
            occupancy,
            features,
        })
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn embedding_dim(&self) -> usize {
        self.embedding_dim
    }

    pub fn occupancy(&self) -> &[f64] {
        &self.occupancy
    }

    /// Row-major: voxel `v` occupies `features[v*C..(v+1)*C]`.
    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn feature(&self, linear: usize) -> &[f64] {
        let c = self.embedding_dim;
        &self.features[linear * c..(linear + 1) * c]
    }

    pub fn feature_norm(&self, linear: usize) -> f64 {
        self.feature(linear).iter().map(|f| f * f).sum::<f64>().sqrt()
    }

    /// (max |Δoccupancy|, max |Δfeature|) against a grid of the same shape.
    pub fn max_abs_diff(&self, other: &FeatureGrid) -> Result<(f64, f64)> {
        if self.geometry.dims != other.geometry.dims || self.embedding_dim != other.embedding_dim {
            return Err(Error::Shape("feature grids differ in shape".into()));
        }
        let max = |a: &[f64], b: &[f64]| {
            a.iter()
                .zip(b)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0f64, f64::max)
        };
        Ok((
            max(&self.occupancy, &other.occupancy),
            max(&self.features, &other.features),
        ))
    }
}

/// Splat `set` onto every voxel center of `geom`.
///
/// With a finite `truncation_sigma`, a Gaussian only reaches voxels within
/// that Mahalanobis distance of its center; `f64::INFINITY` evaluates every
/// Gaussian at every voxel. Either way each voxel folds its Gaussians in
/// ascending index order, so results are deterministic.
pub fn splat(set: &GaussianSet, geom: &GridGeometry, truncation_sigma: f64) -> Result<FeatureGrid> {
    if !(truncation_sigma > 0.0) {
        return Err(Error::Argument(format!(
            "truncation sigma must be positive, got {truncation_sigma}"
        )));
    }
    let n = geom.num_voxels();
    let c = set.embedding_dim;
    let prepared = set.prepare();
    let mut occupancy = vec![0.0; n];
    let mut features = vec![0.0; n * c];

    if truncation_sigma.is_infinite() {
        occupancy
            .par_iter_mut()
            .zip(features.par_chunks_mut(c.max(1)))
            .enumerate()
            .for_each(|(v, (occ, feat))| {
                let x = geom.linear_center(v);
                let mut acc = Accumulator::new(feat);
                for (p, g) in prepared.iter().zip(&set.gaussians) {
                    acc.add(p, &g.embedding, x);
                }
                *occ = acc.finish();
            });
    } else {
        let bins = bin_gaussians(&prepared, geom, truncation_sigma);
        occupancy
            .par_iter_mut()
            .zip(features.par_chunks_mut(c.max(1)))
            .enumerate()
            .for_each(|(v, (occ, feat))| {
                let members = &bins.members[bins.offsets[v]..bins.offsets[v + 1]];
                if members.is_empty() {
                    return;
                }
                let x = geom.linear_center(v);
                let mut acc = Accumulator::new(feat);
                for &j in members {
                    let j = j as usize;
                    acc.add(&prepared[j], &set.gaussians[j].embedding, x);
                }
                *occ = acc.finish();
            });
    }
    FeatureGrid::new(*geom, c, occupancy, features)
}

/// Voxel → Gaussian membership in CSR layout, members ascending per voxel.
struct Bins {
    offsets: Vec<usize>,
    members: Vec<u32>,
}

fn bin_gaussians(prepared: &[Prepared], geom: &GridGeometry, truncation_sigma: f64) -> Bins {
    let limit = truncation_sigma * truncation_sigma;
    // Each Gaussian's reach: voxels in its axis-aligned bound whose center is
    // within the truncation ellipsoid.
    let reach: Vec<Vec<u32>> = prepared
        .par_iter()
        .map(|p| {
            let mut lo = [0u32; 3];
            let mut hi = [0u32; 3];
            for k in 0..3 {
                let half = truncation_sigma * p.marginal_sigma[k];
                let to_index = |m: f64| (m - geom.origin[k]) / geom.voxel_size[k] - 0.5;
                let a = to_index(p.center[k] - half).ceil().max(0.0);
                let b = to_index(p.center[k] + half)
                    .floor()
                    .min(geom.dims[k] as f64 - 1.0);
                if a > b {
                    return Vec::new();
                }
                lo[k] = a as u32;
                hi[k] = b as u32;
            }
            let mut out = Vec::new();
            for z in lo[2]..=hi[2] {
                for y in lo[1]..=hi[1] {
                    for x in lo[0]..=hi[0] {
                        let idx = [x, y, z];
                        if p.mahalanobis_sq(geom.center_unchecked(idx)) <= limit {
                            out.push(geom.linear(idx) as u32);
                        }
                    }
                }
            }
            out
        })
        .collect();

    let n = geom.num_voxels();
    let mut offsets = vec![0usize; n + 1];
    for r in &reach {
        for &v in r {
            offsets[v as usize + 1] += 1;
        }
    }
    for v in 0..n {
        offsets[v + 1] += offsets[v];
    }
    let mut cursor = offsets.clone();
    let mut members = vec![0u32; offsets[n]];
    for (j, r) in reach.iter().enumerate() {
        for &v in r {
            members[cursor[v as usize]] = j as u32;
            cursor[v as usize] += 1;
        }
    }
    Bins { offsets, members }
}
