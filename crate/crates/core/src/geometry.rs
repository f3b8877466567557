//! Volumes with physical geometry, axis-aligned voxel boxes, and the
//! crop/embed transforms used throughout the pipeline.
//!
//! Voxel buffers are x-fastest: the linear index of `(x, y, z)` is
//! `x + nx * (y + ny * z)`. World coordinates are millimetres:
//! `world = offset + direction · (index ⊙ spacing)`.

use std::collections::BTreeSet;

use crate::error::{Error, Result};

/// Label value carried by a [`LabelVolume`]; 0 is background.
pub type Label = u8;

/// Tolerance for the orthonormality check on direction matrices.
const DIRECTION_TOLERANCE: f64 = 1e-6;

/// Relative tolerance used when comparing geometries read back from files.
pub const GEOMETRY_MATCH_TOLERANCE: f64 = 1e-6;

pub const IDENTITY_DIRECTION: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageGeometry {
    dims: [usize; 3],
    spacing: [f64; 3],
    offset: [f64; 3],
    /// Row-major; column `a` is the world direction of index axis `a`.
    direction: [[f64; 3]; 3],
}

impl ImageGeometry {
    pub fn new(
        dims: [usize; 3],
        spacing: [f64; 3],
        offset: [f64; 3],
        direction: [[f64; 3]; 3],
    ) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::InvalidGeometry(format!("dims {dims:?} must all be >= 1")));
        }
        if spacing.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
            return Err(Error::InvalidGeometry(format!(
                "spacing {spacing:?} must be finite and strictly positive"
            )));
        }
        if offset.iter().any(|o| !o.is_finite()) {
            return Err(Error::InvalidGeometry(format!("offset {offset:?} must be finite")));
        }
        check_orthonormal(&direction)?;
        Ok(Self { dims, spacing, offset, direction })
    }

    /// Unit spacing, zero offset, identity direction.
    pub fn with_dims(dims: [usize; 3]) -> Result<Self> {
        Self::new(dims, [1.0; 3], [0.0; 3], IDENTITY_DIRECTION)
    }

    /// Identity direction with the given spacing and offset.
    pub fn axis_aligned(dims: [usize; 3], spacing: [f64; 3], offset: [f64; 3]) -> Result<Self> {
        Self::new(dims, spacing, offset, IDENTITY_DIRECTION)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn offset(&self) -> [f64; 3] {
        self.offset
    }

    pub fn direction(&self) -> [[f64; 3]; 3] {
        self.direction
    }

    pub fn voxel_count(&self) -> usize {
        self.dims.iter().product()
    }

    /// Volume of a single voxel in mm³.
    pub fn voxel_volume(&self) -> f64 {
        self.spacing[0] * self.spacing[1] * self.spacing[2]
    }

    pub fn contains_index(&self, idx: [usize; 3]) -> bool {
        idx.iter().zip(self.dims).all(|(&i, n)| i < n)
    }

    #[inline]
    pub fn linear_index(&self, idx: [usize; 3]) -> usize {
        idx[0] + self.dims[0] * (idx[1] + self.dims[1] * idx[2])
    }

    #[inline]
    pub fn index_of(&self, linear: usize) -> [usize; 3] {
        let [nx, ny, _] = self.dims;
        [linear % nx, (linear / nx) % ny, linear / (nx * ny)]
    }

    pub fn index_to_world(&self, idx: [usize; 3]) -> Result<[f64; 3]> {
        if !self.contains_index(idx) {
            return Err(Error::IndexOutOfBounds { index: idx, dims: self.dims });
        }
        Ok(self.index_to_world_unchecked(idx))
    }

    /// Affine map without the bounds check; also valid for indices past the
    /// end of the grid.
    #[inline]
    pub fn index_to_world_unchecked(&self, idx: [usize; 3]) -> [f64; 3] {
        let scaled = [
            idx[0] as f64 * self.spacing[0],
            idx[1] as f64 * self.spacing[1],
            idx[2] as f64 * self.spacing[2],
        ];
        let mut out = self.offset;
        for (r, row) in self.direction.iter().enumerate() {
            out[r] += row[0] * scaled[0] + row[1] * scaled[1] + row[2] * scaled[2];
        }
        out
    }

    /// Geometry of the sub-grid selected by `bx`.
    pub fn cropped(&self, bx: &VoxelBox) -> Result<Self> {
        bx.validate(self.dims)?;
        Ok(Self {
            dims: bx.extent(),
            spacing: self.spacing,
            offset: self.index_to_world_unchecked(bx.start),
            direction: self.direction,
        })
    }

    /// Same geometry with every spacing multiplied by `factor`; the offset is
    /// scaled too, so world coordinates scale uniformly about the origin.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.dims,
            self.spacing.map(|s| s * factor),
            self.offset.map(|o| o * factor),
            self.direction,
        )
    }

    /// Equal dims, and spacing/offset/direction equal within
    /// [`GEOMETRY_MATCH_TOLERANCE`] (relative to magnitude, absolute near zero).
    pub fn matches(&self, other: &Self) -> bool {
        self.dims == other.dims
            && self.spacing_and_direction_match(other)
            && close3(&self.offset, &other.offset)
    }

    pub fn spacing_and_direction_match(&self, other: &Self) -> bool {
        close3(&self.spacing, &other.spacing)
            && (0..3).all(|r| close3(&self.direction[r], &other.direction[r]))
    }

    /// Human-readable description of how `self` differs from `other`.
    pub fn describe_mismatch(&self, other: &Self) -> String {
        let mut parts = Vec::new();
        if self.dims != other.dims {
            parts.push(format!("dims {:?} vs {:?}", self.dims, other.dims));
        }
        if !close3(&self.spacing, &other.spacing) {
            parts.push(format!("spacing {:?} vs {:?}", self.spacing, other.spacing));
        }
        if !close3(&self.offset, &other.offset) {
            parts.push(format!("offset {:?} vs {:?}", self.offset, other.offset));
        }
        if !(0..3).all(|r| close3(&self.direction[r], &other.direction[r])) {
            parts.push(format!("direction {:?} vs {:?}", self.direction, other.direction));
        }
        parts.join("; ")
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= GEOMETRY_MATCH_TOLERANCE * a.abs().max(b.abs()).max(1.0)
}

fn close3(a: &[f64; 3], b: &[f64; 3]) -> bool {
    a.iter().zip(b).all(|(&x, &y)| close(x, y))
}

fn check_orthonormal(d: &[[f64; 3]; 3]) -> Result<()> {
    if d.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidGeometry("direction has non-finite entries".into()));
    }
    for i in 0..3 {
        for j in 0..3 {
            let dot: f64 = (0..3).map(|r| d[r][i] * d[r][j]).sum();
            let want = if i == j { 1.0 } else { 0.0 };
            if (dot - want).abs() > DIRECTION_TOLERANCE {
                return Err(Error::InvalidGeometry(format!(
                    "direction {d:?} is not orthonormal"
                )));
            }
        }
    }
    Ok(())
}

/// Storage type of a volume's voxels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElementKind {
    U8,
    I16,
    U16,
    F32,
    F64,
}

impl ElementKind {
    pub const ALL: [ElementKind; 5] =
        [ElementKind::U8, ElementKind::I16, ElementKind::U16, ElementKind::F32, ElementKind::F64];

    pub fn size_bytes(self) -> usize {
        match self {
            ElementKind::U8 => 1,
            ElementKind::I16 | ElementKind::U16 => 2,
            ElementKind::F32 => 4,
            ElementKind::F64 => 8,
        }
    }

    pub fn is_integer(self) -> bool {
        matches!(self, ElementKind::U8 | ElementKind::I16 | ElementKind::U16)
    }
}

/// Typed voxel buffer.
#[derive(Debug, Clone, PartialEq)]
pub enum VoxelData {
    U8(Vec<u8>),
    I16(Vec<i16>),
    U16(Vec<u16>),
    F32(Vec<f32>),
    F64(Vec<f64>),
}

/// Applies the same expression to whichever buffer variant is held.
macro_rules! with_buffer {
    ($data:expr, $buf:ident => $body:expr) => {
        match $data {
            VoxelData::U8($buf) => $body,
            VoxelData::I16($buf) => $body,
            VoxelData::U16($buf) => $body,
            VoxelData::F32($buf) => $body,
            VoxelData::F64($buf) => $body,
        }
    };
}

/// Like [`with_buffer`], rewrapping the result in the same variant.
macro_rules! map_buffer {
    ($data:expr, $buf:ident => $body:expr) => {
        match $data {
            VoxelData::U8($buf) => VoxelData::U8($body),
            VoxelData::I16($buf) => VoxelData::I16($body),
            VoxelData::U16($buf) => VoxelData::U16($body),
            VoxelData::F32($buf) => VoxelData::F32($body),
            VoxelData::F64($buf) => VoxelData::F64($body),
        }
    };
}

impl VoxelData {
    pub fn kind(&self) -> ElementKind {
        match self {
            VoxelData::U8(_) => ElementKind::U8,
            VoxelData::I16(_) => ElementKind::I16,
            VoxelData::U16(_) => ElementKind::U16,
            VoxelData::F32(_) => ElementKind::F32,
            VoxelData::F64(_) => ElementKind::F64,
        }
    }

    pub fn len(&self) -> usize {
        with_buffer!(self, b => b.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get_f64(&self, i: usize) -> f64 {
        match self {
            VoxelData::U8(b) => f64::from(b[i]),
            VoxelData::I16(b) => f64::from(b[i]),
            VoxelData::U16(b) => f64::from(b[i]),
            VoxelData::F32(b) => f64::from(b[i]),
            VoxelData::F64(b) => b[i],
        }
    }

    /// Buffer of `len` copies of `value`, cast (saturating) to `kind`.
    pub fn filled(kind: ElementKind, len: usize, value: f64) -> Self {
        match kind {
            ElementKind::U8 => VoxelData::U8(vec![value as u8; len]),
            ElementKind::I16 => VoxelData::I16(vec![value as i16; len]),
            ElementKind::U16 => VoxelData::U16(vec![value as u16; len]),
            ElementKind::F32 => VoxelData::F32(vec![value as f32; len]),
            ElementKind::F64 => VoxelData::F64(vec![value; len]),
        }
    }
}

/// A 3-D scalar image with physical geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    geometry: ImageGeometry,
    data: VoxelData,
}

impl Volume {
    pub fn new(geometry: ImageGeometry, data: VoxelData) -> Result<Self> {
        if data.len() != geometry.voxel_count() {
            return Err(Error::DimensionMismatch(format!(
                "buffer holds {} voxels but dims {:?} require {}",
                data.len(),
                geometry.dims(),
                geometry.voxel_count()
            )));
        }
        Ok(Self { geometry, data })
    }

    pub fn geometry(&self) -> &ImageGeometry {
        &self.geometry
    }

    pub fn data(&self) -> &VoxelData {
        &self.data
    }

    pub fn into_data(self) -> VoxelData {
        self.data
    }

    pub fn element_kind(&self) -> ElementKind {
        self.data.kind()
    }

    pub fn get_f64(&self, idx: [usize; 3]) -> Result<f64> {
        if !self.geometry.contains_index(idx) {
            return Err(Error::IndexOutOfBounds { index: idx, dims: self.geometry.dims() });
        }
        Ok(self.data.get_f64(self.geometry.linear_index(idx)))
    }
}

/// A volume of non-negative integer labels; 0 is background.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelVolume {
    geometry: ImageGeometry,
    labels: Vec<Label>,
}

impl LabelVolume {
    pub fn new(geometry: ImageGeometry, labels: Vec<Label>) -> Result<Self> {
        if labels.len() != geometry.voxel_count() {
            return Err(Error::DimensionMismatch(format!(
                "label buffer holds {} voxels but dims {:?} require {}",
                labels.len(),
                geometry.dims(),
                geometry.voxel_count()
            )));
        }
        Ok(Self { geometry, labels })
    }

    pub fn zeros(geometry: ImageGeometry) -> Self {
        let n = geometry.voxel_count();
        Self { geometry, labels: vec![0; n] }
    }

    /// Converts an image whose voxels are all integers in `0..=255`.
    pub fn from_volume(v: &Volume) -> Result<Self> {
        let labels = match v.data() {
            VoxelData::U8(b) => b.clone(),
            data => (0..data.len())
                .map(|i| {
                    let value = data.get_f64(i);
                    if value.fract() == 0.0 && (0.0..=255.0).contains(&value) {
                        Ok(value as Label)
                    } else {
                        Err(Error::InvalidLabel { value })
                    }
                })
                .collect::<Result<Vec<_>>>()?,
        };
        Ok(Self { geometry: *v.geometry(), labels })
    }

    /// Canonical `u8` image of the labels.
    pub fn to_volume(&self) -> Volume {
        Volume { geometry: self.geometry, data: VoxelData::U8(self.labels.clone()) }
    }

    pub fn geometry(&self) -> &ImageGeometry {
        &self.geometry
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn get(&self, idx: [usize; 3]) -> Option<Label> {
        self.geometry
            .contains_index(idx)
            .then(|| self.labels[self.geometry.linear_index(idx)])
    }

    pub fn set(&mut self, idx: [usize; 3], label: Label) -> Result<()> {
        if !self.geometry.contains_index(idx) {
            return Err(Error::IndexOutOfBounds { index: idx, dims: self.geometry.dims() });
        }
        let i = self.geometry.linear_index(idx);
        self.labels[i] = label;
        Ok(())
    }

    /// Distinct labels present, background included when present.
    pub fn label_set(&self) -> BTreeSet<Label> {
        let mut seen = [false; 256];
        for &l in &self.labels {
            seen[l as usize] = true;
        }
        (0..=255u8).filter(|&l| seen[l as usize]).collect()
    }

    /// Voxel count per label, in ascending label order.
    pub fn histogram(&self) -> Vec<(Label, usize)> {
        let mut counts = [0usize; 256];
        for &l in &self.labels {
            counts[l as usize] += 1;
        }
        (0..=255u8).filter(|&l| counts[l as usize] > 0).map(|l| (l, counts[l as usize])).collect()
    }

    pub fn count(&self, label: Label) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    pub fn extract_box(&self, bx: &VoxelBox) -> Result<(LabelVolume, CropTransform)> {
        let geometry = self.geometry.cropped(bx)?;
        let labels = copy_box(&self.labels, self.geometry.dims(), bx);
        Ok((LabelVolume { geometry, labels }, CropTransform::new(self.geometry, *bx)?))
    }

    /// Embeds into the transform's original grid with background fill.
    pub fn embed_box(&self, t: &CropTransform) -> Result<LabelVolume> {
        t.check_cropped(&self.geometry)?;
        let labels = paste_box(&self.labels, t.original_geometry.dims(), &t.bx, 0);
        Ok(LabelVolume { geometry: t.original_geometry, labels })
    }
}

/// Axis-aligned box in index space: `start` inclusive, `end` exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct VoxelBox {
    pub start: [usize; 3],
    pub end: [usize; 3],
}

impl VoxelBox {
    /// A box validated against `dims`.
    pub fn new(start: [usize; 3], end: [usize; 3], dims: [usize; 3]) -> Result<Self> {
        let bx = Self { start, end };
        bx.validate(dims)?;
        Ok(bx)
    }

    pub fn full(dims: [usize; 3]) -> Self {
        Self { start: [0; 3], end: dims }
    }

    pub fn validate(&self, dims: [usize; 3]) -> Result<()> {
        for a in 0..3 {
            if !(self.start[a] < self.end[a] && self.end[a] <= dims[a]) {
                return Err(Error::InvalidBox(format!(
                    "axis {a}: need start < end <= dim, got start {} end {} dim {}",
                    self.start[a], self.end[a], dims[a]
                )));
            }
        }
        Ok(())
    }

    pub fn extent(&self) -> [usize; 3] {
        [0, 1, 2].map(|a| self.end[a].saturating_sub(self.start[a]))
    }

    pub fn voxel_count(&self) -> usize {
        self.extent().iter().product()
    }

    pub fn contains(&self, idx: [usize; 3]) -> bool {
        (0..3).all(|a| self.start[a] <= idx[a] && idx[a] < self.end[a])
    }

    pub fn contains_box(&self, other: &VoxelBox) -> bool {
        (0..3).all(|a| self.start[a] <= other.start[a] && other.end[a] <= self.end[a])
    }
}

/// A crop recorded against the grid it was taken from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CropTransform {
    original_geometry: ImageGeometry,
    bx: VoxelBox,
}

impl CropTransform {
    pub fn new(original_geometry: ImageGeometry, bx: VoxelBox) -> Result<Self> {
        bx.validate(original_geometry.dims())?;
        Ok(Self { original_geometry, bx })
    }

    pub fn original_geometry(&self) -> &ImageGeometry {
        &self.original_geometry
    }

    pub fn voxel_box(&self) -> &VoxelBox {
        &self.bx
    }

    /// Geometry of the cropped grid.
    pub fn cropped_geometry(&self) -> ImageGeometry {
        self.original_geometry
            .cropped(&self.bx)
            .expect("box validated at construction")
    }

    fn check_cropped(&self, cropped: &ImageGeometry) -> Result<()> {
        let extent = self.bx.extent();
        if cropped.dims() != extent {
            return Err(Error::DimensionMismatch(format!(
                "cropped dims {:?} differ from box extent {:?}",
                cropped.dims(),
                extent
            )));
        }
        if !cropped.spacing_and_direction_match(&self.original_geometry) {
            return Err(Error::GeometryMismatch(format!(
                "cropped spacing/direction differ from the original grid: {}",
                cropped.describe_mismatch(&self.cropped_geometry())
            )));
        }
        Ok(())
    }
}

fn copy_box<T: Copy>(src: &[T], dims: [usize; 3], bx: &VoxelBox) -> Vec<T> {
    let [nx, ny, _] = dims;
    let mut out = Vec::with_capacity(bx.voxel_count());
    for z in bx.start[2]..bx.end[2] {
        for y in bx.start[1]..bx.end[1] {
            let row = nx * (y + ny * z);
            out.extend_from_slice(&src[row + bx.start[0]..row + bx.end[0]]);
        }
    }
    out
}

fn paste_box<T: Copy>(cropped: &[T], dims: [usize; 3], bx: &VoxelBox, fill: T) -> Vec<T> {
    let [nx, ny, nz] = dims;
    let mut out = vec![fill; nx * ny * nz];
    let width = bx.end[0] - bx.start[0];
    let mut rows = cropped.chunks_exact(width);
    for z in bx.start[2]..bx.end[2] {
        for y in bx.start[1]..bx.end[1] {
            let row = nx * (y + ny * z);
            let src = rows.next().expect("cropped buffer matches box extent");
            out[row + bx.start[0]..row + bx.end[0]].copy_from_slice(src);
        }
    }
    out
}

/// Copies the voxels inside `bx` into a new volume positioned at the box's
/// world location.
pub fn extract_box(v: &Volume, bx: &VoxelBox) -> Result<(Volume, CropTransform)> {
    let geometry = v.geometry.cropped(bx)?;
    let dims = v.geometry.dims();
    let data = map_buffer!(&v.data, b => copy_box(b, dims, bx));
    Ok((Volume { geometry, data }, CropTransform::new(v.geometry, *bx)?))
}

/// Inverse of [`extract_box`]: places `cropped` back on the original grid,
/// filling everything outside the box with `fill` (cast to the element kind).
pub fn embed_box(cropped: &Volume, t: &CropTransform, fill: f64) -> Result<Volume> {
    t.check_cropped(&cropped.geometry)?;
    let dims = t.original_geometry.dims();
    let bx = &t.bx;
    let data = match &cropped.data {
        VoxelData::U8(b) => VoxelData::U8(paste_box(b, dims, bx, fill as u8)),
        VoxelData::I16(b) => VoxelData::I16(paste_box(b, dims, bx, fill as i16)),
        VoxelData::U16(b) => VoxelData::U16(paste_box(b, dims, bx, fill as u16)),
        VoxelData::F32(b) => VoxelData::F32(paste_box(b, dims, bx, fill as f32)),
        VoxelData::F64(b) => VoxelData::F64(paste_box(b, dims, bx, fill)),
    };
    Ok(Volume { geometry: t.original_geometry, data })
}

/// Tightest box holding every voxel whose label is in `labels`.
pub fn bounding_box_of_labels(lv: &LabelVolume, labels: &[Label]) -> Result<VoxelBox> {
    let mut wanted = [false; 256];
    for &l in labels {
        wanted[l as usize] = true;
    }
    let mut lo = [usize::MAX; 3];
    let mut hi = [0usize; 3];
    let mut any = false;
    for (i, &l) in lv.labels.iter().enumerate() {
        if wanted[l as usize] {
            any = true;
            let idx = lv.geometry.index_of(i);
            for a in 0..3 {
                lo[a] = lo[a].min(idx[a]);
                hi[a] = hi[a].max(idx[a] + 1);
            }
        }
    }
    if !any {
        return Err(Error::EmptyRegion { labels: labels.to_vec() });
    }
    Ok(VoxelBox { start: lo, end: hi })
}

/// Grows `bx` by `margin_mm` on every side (rounded up to whole voxels per
/// axis) and clamps to the grid.
pub fn expand_box_mm(bx: &VoxelBox, g: &ImageGeometry, margin_mm: f64) -> Result<VoxelBox> {
    if !(margin_mm.is_finite() && margin_mm >= 0.0) {
        return Err(Error::InvalidParameter(format!("margin {margin_mm} mm must be >= 0")));
    }
    bx.validate(g.dims())?;
    let dims = g.dims();
    let spacing = g.spacing();
    let mut out = *bx;
    for a in 0..3 {
        let grow = (margin_mm / spacing[a]).ceil();
        // saturate huge margins instead of overflowing
        let grow = if grow >= dims[a] as f64 { dims[a] } else { grow as usize };
        out.start[a] = bx.start[a].saturating_sub(grow);
        out.end[a] = (bx.end[a] + grow).min(dims[a]);
    }
    Ok(out)
}

/// Box covering the fractional index window `[lo, hi)` on each axis, with the
/// lower edge floored and the upper edge ceiled.
pub fn box_from_percent(g: &ImageGeometry, lo: [f64; 3], hi: [f64; 3]) -> Result<VoxelBox> {
    let dims = g.dims();
    let mut bx = VoxelBox::full(dims);
    for a in 0..3 {
        if !(0.0 <= lo[a] && lo[a] < hi[a] && hi[a] <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "axis {a}: need 0 <= lo < hi <= 1, got lo {} hi {}",
                lo[a], hi[a]
            )));
        }
        let n = dims[a];
        let start = (snap(lo[a] * n as f64).floor() as usize).min(n - 1);
        let end = (snap(hi[a] * n as f64).ceil() as usize).clamp(start + 1, n);
        bx.start[a] = start;
        bx.end[a] = end;
    }
    Ok(bx)
}

/// Rounds products like `0.7 * 10 = 7.000000000000001` back onto the integer
/// they represent before floor/ceil.
fn snap(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * x.abs().max(1.0) {
        r
    } else {
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(dims: [usize; 3]) -> Volume {
        let g = ImageGeometry::with_dims(dims).unwrap();
        let n = g.voxel_count();
        Volume::new(g, VoxelData::I16((0..n as i16).collect())).unwrap()
    }

    #[test]
    fn index_to_world_examples() {
        let g = ImageGeometry::with_dims([4, 4, 4]).unwrap();
        assert_eq!(g.index_to_world([0, 0, 0]).unwrap(), [0.0, 0.0, 0.0]);

        let g = ImageGeometry::axis_aligned([8, 8, 8], [2.0; 3], [10.0, 0.0, 0.0]).unwrap();
        assert_eq!(g.index_to_world([3, 0, 0]).unwrap(), [16.0, 0.0, 0.0]);

        let g = ImageGeometry::axis_aligned([8, 8, 8], [1.0, 1.0, 3.0], [0.0, 0.0, -4.5]).unwrap();
        assert_eq!(g.index_to_world([0, 0, 5]).unwrap(), [0.0, 0.0, 10.5]);
    }

    #[test]
    fn index_to_world_out_of_bounds() {
        let g = ImageGeometry::with_dims([2, 2, 2]).unwrap();
        assert!(matches!(g.index_to_world([2, 0, 0]), Err(Error::IndexOutOfBounds { .. })));
    }

    #[test]
    fn rejects_bad_geometry() {
        assert!(ImageGeometry::axis_aligned([1, 1, 1], [1.0, 0.0, 1.0], [0.0; 3]).is_err());
        assert!(ImageGeometry::with_dims([0, 1, 1]).is_err());
        let skew = [[1.0, 0.1, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        assert!(ImageGeometry::new([1, 1, 1], [1.0; 3], [0.0; 3], skew).is_err());
    }

    #[test]
    fn rotated_direction_maps_axes() {
        // index x runs along world +y, index y along world -x
        let d = [[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]];
        let g = ImageGeometry::new([5, 4, 3], [0.75, 1.25, 3.0], [-12.5, 40.0, 7.25], d).unwrap();
        assert_eq!(g.index_to_world([1, 2, 1]).unwrap(), [-15.0, 40.75, 10.25]);
    }

    #[test]
    fn extract_full_box_is_identity() {
        let v = ramp([3, 4, 5]);
        let (out, t) = extract_box(&v, &VoxelBox::full([3, 4, 5])).unwrap();
        assert_eq!(out, v);
        assert_eq!(*t.voxel_box(), VoxelBox::full([3, 4, 5]));
    }

    #[test]
    fn extract_interior_octant() {
        let v = ramp([4, 4, 4]);
        let bx = VoxelBox::new([1, 1, 1], [3, 3, 3], [4, 4, 4]).unwrap();
        let (out, _) = extract_box(&v, &bx).unwrap();
        assert_eq!(out.geometry().dims(), [2, 2, 2]);
        let VoxelData::I16(vals) = out.data() else { panic!() };
        let want: Vec<i16> = [
            [1, 1, 1], [2, 1, 1], [1, 2, 1], [2, 2, 1],
            [1, 1, 2], [2, 1, 2], [1, 2, 2], [2, 2, 2],
        ]
        .iter()
        .map(|&[x, y, z]| (x + 4 * y + 16 * z) as i16)
        .collect();
        assert_eq!(vals, &want);
    }

    #[test]
    fn extract_moves_offset() {
        let g = ImageGeometry::axis_aligned([4, 4, 4], [2.0; 3], [0.0; 3]).unwrap();
        let v = Volume::new(g, VoxelData::U8(vec![0; 64])).unwrap();
        let bx = VoxelBox::new([1, 0, 0], [4, 4, 4], [4, 4, 4]).unwrap();
        let (out, _) = extract_box(&v, &bx).unwrap();
        assert_eq!(out.geometry().offset(), [2.0, 0.0, 0.0]);
        assert_eq!(out.geometry().spacing(), [2.0; 3]);
    }

    #[test]
    fn extract_rejects_invalid_box() {
        let v = ramp([4, 4, 4]);
        let bad = VoxelBox { start: [0, 0, 0], end: [5, 1, 1] };
        assert!(matches!(extract_box(&v, &bad), Err(Error::InvalidBox(_))));
        let empty = VoxelBox { start: [2, 0, 0], end: [2, 1, 1] };
        assert!(extract_box(&v, &empty).is_err());
    }

    #[test]
    fn embed_octant_fills_rest() {
        let g = ImageGeometry::with_dims([2, 2, 2]).unwrap();
        let crop = Volume::new(g, VoxelData::U8(vec![9; 8])).unwrap();
        let bx = VoxelBox::new([1, 1, 1], [3, 3, 3], [4, 4, 4]).unwrap();
        let t = CropTransform::new(ImageGeometry::with_dims([4, 4, 4]).unwrap(), bx).unwrap();
        // offset of the crop is irrelevant; only spacing/direction are checked
        let out = embed_box(&crop, &t, 0.0).unwrap();
        let VoxelData::U8(vals) = out.data() else { panic!() };
        assert_eq!(vals.iter().filter(|&&v| v == 9).count(), 8);
        assert_eq!(vals.iter().filter(|&&v| v == 0).count(), 56);
        for z in 1..3 {
            for y in 1..3 {
                for x in 1..3 {
                    assert_eq!(out.get_f64([x, y, z]).unwrap(), 9.0);
                }
            }
        }
    }

    #[test]
    fn embed_rejects_mismatch() {
        let crop = ramp([2, 2, 2]);
        let bx = VoxelBox::new([0, 0, 0], [3, 2, 2], [4, 4, 4]).unwrap();
        let t = CropTransform::new(ImageGeometry::with_dims([4, 4, 4]).unwrap(), bx).unwrap();
        assert!(matches!(embed_box(&crop, &t, 0.0), Err(Error::DimensionMismatch(_))));

        let g = ImageGeometry::axis_aligned([2, 2, 2], [2.0; 3], [0.0; 3]).unwrap();
        let crop = Volume::new(g, VoxelData::U8(vec![0; 8])).unwrap();
        let bx = VoxelBox::new([0, 0, 0], [2, 2, 2], [4, 4, 4]).unwrap();
        let t = CropTransform::new(ImageGeometry::with_dims([4, 4, 4]).unwrap(), bx).unwrap();
        assert!(matches!(embed_box(&crop, &t, 0.0), Err(Error::GeometryMismatch(_))));
    }

    #[test]
    fn label_crop_roundtrip() {
        let g = ImageGeometry::with_dims([5, 5, 5]).unwrap();
        let labels = (0..125).map(|i| (i % 3) as u8).collect();
        let lv = LabelVolume::new(g, labels).unwrap();
        let bx = VoxelBox::new([1, 0, 2], [4, 3, 5], [5, 5, 5]).unwrap();
        let (crop, t) = lv.extract_box(&bx).unwrap();
        let back = crop.embed_box(&t).unwrap();
        let (again, _) = back.extract_box(&bx).unwrap();
        assert_eq!(again, crop);
    }

    #[test]
    fn bounding_box_examples() {
        let g = ImageGeometry::with_dims([8, 8, 8]).unwrap();
        let mut lv = LabelVolume::zeros(g);
        lv.set([2, 3, 4], 1).unwrap();
        let bx = bounding_box_of_labels(&lv, &[1]).unwrap();
        assert_eq!((bx.start, bx.end), ([2, 3, 4], [3, 4, 5]));

        let mut lv = LabelVolume::zeros(g);
        lv.set([0, 0, 0], 2).unwrap();
        lv.set([5, 1, 2], 2).unwrap();
        let bx = bounding_box_of_labels(&lv, &[2]).unwrap();
        assert_eq!((bx.start, bx.end), ([0, 0, 0], [6, 2, 3]));

        assert!(matches!(bounding_box_of_labels(&lv, &[1]), Err(Error::EmptyRegion { .. })));
    }

    #[test]
    fn expand_examples() {
        let g = ImageGeometry::axis_aligned([64, 64, 64], [2.0; 3], [0.0; 3]).unwrap();
        let bx = VoxelBox::new([20, 20, 20], [30, 30, 30], [64; 3]).unwrap();
        assert_eq!(expand_box_mm(&bx, &g, 0.0).unwrap(), bx);
        let grown = expand_box_mm(&bx, &g, 30.0).unwrap();
        assert_eq!(grown.start, [5, 5, 5]);
        assert_eq!(grown.end, [45, 45, 45]);

        let g = ImageGeometry::axis_aligned([64, 64, 64], [3.0; 3], [0.0; 3]).unwrap();
        let bx = VoxelBox::new([4, 4, 4], [60, 60, 60], [64; 3]).unwrap();
        let grown = expand_box_mm(&bx, &g, 30.0).unwrap();
        assert_eq!(grown.start, [0, 0, 0]);
        assert_eq!(grown.end, [64, 64, 64]);

        assert!(expand_box_mm(&bx, &g, -1.0).is_err());
        assert_eq!(expand_box_mm(&bx, &g, 1e300).unwrap(), VoxelBox::full([64; 3]));
    }

    #[test]
    fn percent_examples() {
        let g = ImageGeometry::with_dims([10, 20, 30]).unwrap();
        assert_eq!(box_from_percent(&g, [0.0; 3], [1.0; 3]).unwrap(), VoxelBox::full([10, 20, 30]));

        let g = ImageGeometry::with_dims([100, 100, 100]).unwrap();
        let bx = box_from_percent(&g, [0.1; 3], [0.9; 3]).unwrap();
        assert_eq!((bx.start, bx.end), ([10; 3], [90; 3]));

        let g = ImageGeometry::with_dims([256, 256, 128]).unwrap();
        let bx = box_from_percent(&g, [0.328, 0.323, 0.148], [0.790, 0.705, 1.0]).unwrap();
        assert_eq!((bx.start[0], bx.end[0]), (83, 203));

        assert!(box_from_percent(&g, [0.5, 0.0, 0.0], [0.5, 1.0, 1.0]).is_err());
        assert!(box_from_percent(&g, [0.0; 3], [1.1, 1.0, 1.0]).is_err());
    }

    #[test]
    fn percent_ignores_float_noise() {
        // 0.7 * 10 evaluates to 7.000000000000001
        let g = ImageGeometry::with_dims([10, 10, 10]).unwrap();
        let bx = box_from_percent(&g, [0.29; 3], [0.7; 3]).unwrap();
        assert_eq!((bx.start, bx.end), ([2; 3], [7; 3]));
    }

    #[test]
    fn tiny_window_still_nonempty() {
        let g = ImageGeometry::with_dims([4, 4, 4]).unwrap();
        let bx = box_from_percent(&g, [0.999; 3], [1.0; 3]).unwrap();
        assert_eq!((bx.start, bx.end), ([3; 3], [4; 3]));
    }

    #[test]
    fn label_volume_from_float_volume() {
        let g = ImageGeometry::with_dims([2, 1, 1]).unwrap();
        let v = Volume::new(g, VoxelData::F32(vec![0.0, 2.0])).unwrap();
        assert_eq!(LabelVolume::from_volume(&v).unwrap().labels(), &[0, 2]);
        let v = Volume::new(g, VoxelData::F32(vec![0.5, 2.0])).unwrap();
        assert!(matches!(LabelVolume::from_volume(&v), Err(Error::InvalidLabel { .. })));
        let v = Volume::new(g, VoxelData::U16(vec![0, 300])).unwrap();
        assert!(LabelVolume::from_volume(&v).is_err());
    }
}
