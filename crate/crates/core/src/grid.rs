//! Grid geometry, label taxonomy and the panoptic voxel containers.
//!
//! Voxels are stored in a flat array, x fastest: `linear = x + X * (y + Y * z)`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Instance ID reserved for "no instance".
pub const NO_INSTANCE: u32 = 0;

/// Maximum number of classes a [`LabelSpec`] may hold.
pub const MAX_CLASSES: usize = 65535;

/// Axis-aligned voxel grid placed in metric space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub origin: [f64; 3],
    pub voxel_size: [f64; 3],
    pub dims: [u32; 3],
}

impl GridGeometry {
    pub fn new(origin: [f64; 3], voxel_size: [f64; 3], dims: [u32; 3]) -> Result<Self> {
        if voxel_size.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::Argument(format!(
                "voxel size must be positive and finite, got {voxel_size:?}"
            )));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::Argument(format!("grid dims must be >= 1, got {dims:?}")));
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::Argument(format!("origin must be finite, got {origin:?}")));
        }
        Ok(Self {
            origin,
            voxel_size,
            dims,
        })
    }

    /// Unit voxels at the origin.
    pub fn unit(dims: [u32; 3]) -> Result<Self> {
        Self::new([0.0; 3], [1.0; 3], dims)
    }

    pub fn num_voxels(&self) -> usize {
        self.dims.iter().map(|&d| d as usize).product()
    }

    pub fn contains(&self, index: [i64; 3]) -> bool {
        index
            .iter()
            .zip(self.dims.iter())
            .all(|(&i, &d)| i >= 0 && i < d as i64)
    }

    pub fn linear(&self, index: [u32; 3]) -> usize {
        let [x, y, z] = index.map(|v| v as usize);
        let [nx, ny, _] = self.dims.map(|v| v as usize);
        x + nx * (y + ny * z)
    }

    pub fn unlinear(&self, linear: usize) -> [u32; 3] {
        let [nx, ny, _] = self.dims.map(|v| v as usize);
        let x = linear % nx;
        let y = (linear / nx) % ny;
        let z = linear / (nx * ny);
        [x as u32, y as u32, z as u32]
    }

    /// Metric center of voxel `index`.
    pub fn voxel_center(&self, index: [i64; 3]) -> Result<[f64; 3]> {
        if !self.contains(index) {
            return Err(Error::Range(format!(
                "voxel index {index:?} outside grid dims {:?}",
                self.dims
            )));
        }
        Ok(self.center_unchecked([index[0] as u32, index[1] as u32, index[2] as u32]))
    }

    pub(crate) fn center_unchecked(&self, index: [u32; 3]) -> [f64; 3] {
        std::array::from_fn(|k| self.origin[k] + (index[k] as f64 + 0.5) * self.voxel_size[k])
    }

    pub fn linear_center(&self, linear: usize) -> [f64; 3] {
        self.center_unchecked(self.unlinear(linear))
    }

    /// Index of the voxel containing `point`, or `None` outside the grid.
    pub fn point_to_index(&self, point: [f64; 3]) -> Option<[u32; 3]> {
        let idx: [i64; 3] = std::array::from_fn(|k| {
            ((point[k] - self.origin[k]) / self.voxel_size[k]).floor() as i64
        });
        self.contains(idx)
            .then(|| [idx[0] as u32, idx[1] as u32, idx[2] as u32])
    }
}

/// Class taxonomy shared by all frames of a sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSpec {
    pub classes: Vec<String>,
    pub thing: Vec<bool>,
    pub free_class: u16,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unknown_class: Option<u16>,
}

impl LabelSpec {
    pub fn new(
        classes: Vec<String>,
        thing: Vec<bool>,
        free_class: u16,
        unknown_class: Option<u16>,
    ) -> Result<Self> {
        let spec = Self {
            classes,
            thing,
            free_class,
            unknown_class,
        };
        spec.check()?;
        Ok(spec)
    }

    pub(crate) fn check(&self) -> Result<()> {
        let c = self.classes.len();
        if c == 0 || c > MAX_CLASSES {
            return Err(Error::Argument(format!(
                "class count must be in 1..={MAX_CLASSES}, got {c}"
            )));
        }
        if self.thing.len() != c {
            return Err(Error::Argument(format!(
                "{} thing flags for {c} classes",
                self.thing.len()
            )));
        }
        if self.free_class as usize >= c {
            return Err(Error::Argument(format!("free class {} out of range", self.free_class)));
        }
        if self.thing[self.free_class as usize] {
            return Err(Error::Argument("free class cannot be a thing class".into()));
        }
        if let Some(u) = self.unknown_class {
            if u as usize >= c {
                return Err(Error::Argument(format!("unknown class {u} out of range")));
            }
        }
        Ok(())
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn is_thing(&self, class: u16) -> bool {
        self.thing.get(class as usize).copied().unwrap_or(false)
    }

    /// Non-free, non-thing class.
    pub fn is_stuff(&self, class: u16) -> bool {
        (class as usize) < self.classes.len() && class != self.free_class && !self.is_thing(class)
    }

    pub fn class_index(&self, name: &str) -> Option<u16> {
        self.classes.iter().position(|c| c == name).map(|i| i as u16)
    }
}

/// Per-voxel semantic class, instance ID and visibility for one timestep.
#[derive(Debug, Clone, PartialEq)]
pub struct PanopticGrid {
    geometry: GridGeometry,
    pub(crate) semantics: Vec<u16>,
    pub(crate) instances: Vec<u32>,
    pub(crate) visibility: Vec<bool>,
}

impl PanopticGrid {
    /// Fails only on array-length mismatch; label invariants are reported by
    /// [`validate`].
    pub fn new(
        geometry: GridGeometry,
        semantics: Vec<u16>,
        instances: Vec<u32>,
        visibility: Vec<bool>,
    ) -> Result<Self> {
        let n = geometry.num_voxels();
        for (name, len) in [
            ("semantics", semantics.len()),
            ("instances", instances.len()),
            ("visibility", visibility.len()),
        ] {
            if len != n {
                return Err(Error::Shape(format!(
                    "{name} has {len} entries, grid {:?} needs {n}",
                    geometry.dims
                )));
            }
        }
        Ok(Self {
            geometry,
            semantics,
            instances,
            visibility,
        })
    }

    /// Every voxel `class`, no instances, all visible.
    pub fn filled(geometry: GridGeometry, class: u16) -> Self {
        let n = geometry.num_voxels();
        Self {
            geometry,
            semantics: vec![class; n],
            instances: vec![NO_INSTANCE; n],
            visibility: vec![true; n],
        }
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn semantics(&self) -> &[u16] {
        &self.semantics
    }

    pub fn instances(&self) -> &[u32] {
        &self.instances
    }

    pub fn visibility(&self) -> &[bool] {
        &self.visibility
    }

    pub fn len(&self) -> usize {
        self.semantics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.semantics.is_empty()
    }

    pub fn set(&mut self, linear: usize, class: u16, instance: u32) {
        self.semantics[linear] = class;
        self.instances[linear] = instance;
    }

    pub fn set_visible(&mut self, linear: usize, visible: bool) {
        self.visibility[linear] = visible;
    }

    pub fn with_instances(mut self, instances: Vec<u32>) -> Result<Self> {
        if instances.len() != self.len() {
            return Err(Error::Shape(format!(
                "{} instance entries for {} voxels",
                instances.len(),
                self.len()
            )));
        }
        self.instances = instances;
        Ok(self)
    }

    pub fn with_visibility(mut self, visibility: Vec<bool>) -> Result<Self> {
        if visibility.len() != self.len() {
            return Err(Error::Shape(format!(
                "{} visibility entries for {} voxels",
                visibility.len(),
                self.len()
            )));
        }
        self.visibility = visibility;
        Ok(self)
    }

    pub fn into_parts(self) -> (GridGeometry, Vec<u16>, Vec<u32>, Vec<bool>) {
        (self.geometry, self.semantics, self.instances, self.visibility)
    }
}

/// Which invariant a voxel breaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    ClassOutOfRange,
    InstanceOnNonThing,
    InstanceOnFree,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rule::ClassOutOfRange => "class index outside the label spec",
            Rule::InstanceOnNonThing => "instance ID on a non-thing class",
            Rule::InstanceOnFree => "instance ID on the free class",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub voxel: [u32; 3],
    pub rule: Rule,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "voxel {:?}: {}", self.voxel, self.rule)
    }
}

/// Lists every invariant breach in `grid`; empty means valid.
///
/// A voxel breaks at most one rule: free-class instances are reported as
/// [`Rule::InstanceOnFree`] rather than also as a non-thing breach.
pub fn validate(grid: &PanopticGrid, spec: &LabelSpec) -> Vec<Violation> {
    let geom = grid.geometry();
    let c = spec.num_classes();
    let mut out = Vec::new();
    for (v, (&class, &inst)) in grid.semantics.iter().zip(&grid.instances).enumerate() {
        let rule = if class as usize >= c {
            Some(Rule::ClassOutOfRange)
        } else if inst != NO_INSTANCE && class == spec.free_class {
            Some(Rule::InstanceOnFree)
        } else if inst != NO_INSTANCE && !spec.is_thing(class) {
            Some(Rule::InstanceOnNonThing)
        } else {
            None
        };
        if let Some(rule) = rule {
            out.push(Violation {
                voxel: geom.unlinear(v),
                rule,
            });
        }
    }
    out
}

/// Ordered frames sharing one geometry and label spec.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackedSequence {
    spec: LabelSpec,
    geometry: GridGeometry,
    pub(crate) frames: Vec<PanopticGrid>,
    timestamps: Vec<i64>,
}

impl TrackedSequence {
    pub fn new(
        spec: LabelSpec,
        geometry: GridGeometry,
        frames: Vec<PanopticGrid>,
        timestamps: Vec<i64>,
    ) -> Result<Self> {
        spec.check()?;
        if frames.len() != timestamps.len() {
            return Err(Error::Shape(format!(
                "{} frames but {} timestamps",
                frames.len(),
                timestamps.len()
            )));
        }
        if let Some(f) = frames.iter().position(|f| *f.geometry() != geometry) {
            return Err(Error::Shape(format!("frame {f} geometry differs from the sequence")));
        }
        if timestamps.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Argument("timestamps must be strictly increasing".into()));
        }
        Ok(Self {
            spec,
            geometry,
            frames,
            timestamps,
        })
    }

    /// Frames stamped 0, 1, 2, ...
    pub fn from_frames(
        spec: LabelSpec,
        geometry: GridGeometry,
        frames: Vec<PanopticGrid>,
    ) -> Result<Self> {
        let ts = (0..frames.len() as i64).collect();
        Self::new(spec, geometry, frames, ts)
    }

    pub fn spec(&self) -> &LabelSpec {
        &self.spec
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn frames(&self) -> &[PanopticGrid] {
        &self.frames
    }

    pub fn frames_mut(&mut self) -> &mut [PanopticGrid] {
        &mut self.frames
    }

    pub fn timestamps(&self) -> &[i64] {
        &self.timestamps
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn into_frames(self) -> Vec<PanopticGrid> {
        self.frames
    }

    /// Same geometry, spec and frame count as `other`.
    pub fn check_compatible(&self, other: &TrackedSequence) -> Result<()> {
        if self.geometry.dims != other.geometry.dims {
            return Err(Error::Shape(format!(
                "grid dims {:?} vs {:?}",
                self.geometry.dims, other.geometry.dims
            )));
        }
        if self.frames.len() != other.frames.len() {
            return Err(Error::Shape(format!(
                "{} frames vs {} frames",
                self.frames.len(),
                other.frames.len()
            )));
        }
        if self.spec != other.spec {
            return Err(Error::Shape("label specs differ".into()));
        }
        Ok(())
    }

    /// Validation failures of every frame, tagged with the frame index.
    pub fn validate(&self) -> Vec<(usize, Violation)> {
        self.frames
            .iter()
            .enumerate()
            .flat_map(|(t, f)| validate(f, &self.spec).into_iter().map(move |v| (t, v)))
            .collect()
    }
}
