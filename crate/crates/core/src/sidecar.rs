//! Versioned JSON record of a crop chain, written next to a cropped image so
//! predictions can be restored without the original scan.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CropTransform, ImageGeometry, VoxelBox};

pub const SIDECAR_FORMAT: &str = "segkit-crop-sidecar";
pub const SIDECAR_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryRecord {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub offset: [f64; 3],
    /// Row-major; column `a` is the world direction of index axis `a`.
    pub direction: [[f64; 3]; 3],
}

impl From<&ImageGeometry> for GeometryRecord {
    fn from(g: &ImageGeometry) -> Self {
        Self { dims: g.dims(), spacing: g.spacing(), offset: g.offset(), direction: g.direction() }
    }
}

impl GeometryRecord {
    pub fn to_geometry(&self) -> Result<ImageGeometry> {
        ImageGeometry::new(self.dims, self.spacing, self.offset, self.direction)
            .map_err(|e| Error::Sidecar(format!("original geometry: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoxRecord {
    pub start: [usize; 3],
    pub end: [usize; 3],
}

/// Original geometry plus the boxes applied to it, outermost crop first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CropSidecar {
    pub format: String,
    pub version: u32,
    pub original: GeometryRecord,
    pub boxes: Vec<BoxRecord>,
}

impl CropSidecar {
    pub fn new(original: &ImageGeometry, boxes: &[VoxelBox]) -> Result<Self> {
        let sidecar = Self {
            format: SIDECAR_FORMAT.to_string(),
            version: SIDECAR_VERSION,
            original: original.into(),
            boxes: boxes.iter().map(|b| BoxRecord { start: b.start, end: b.end }).collect(),
        };
        sidecar.transforms()?;
        Ok(sidecar)
    }

    /// Builds a sidecar from a chain given outermost first.
    pub fn from_transforms(outermost_first: &[CropTransform]) -> Result<Self> {
        let first = outermost_first
            .first()
            .ok_or_else(|| Error::Sidecar("empty crop chain".into()))?;
        let boxes: Vec<VoxelBox> = outermost_first.iter().map(|t| *t.voxel_box()).collect();
        let sidecar = Self::new(first.original_geometry(), &boxes)?;
        // the chain must be the one the boxes describe
        for (step, (want, got)) in sidecar.transforms()?.iter().zip(outermost_first).enumerate() {
            if !want.original_geometry().matches(got.original_geometry()) {
                return Err(Error::Sidecar(format!("crop {step} does not continue the chain")));
            }
        }
        Ok(sidecar)
    }

    /// Validates the chain and returns it outermost first. Each box must lie
    /// inside the grid produced by all preceding boxes.
    pub fn transforms(&self) -> Result<Vec<CropTransform>> {
        if self.format != SIDECAR_FORMAT {
            return Err(Error::Sidecar(format!(
                "format tag {:?} is not {SIDECAR_FORMAT:?}",
                self.format
            )));
        }
        if self.version > SIDECAR_VERSION {
            return Err(Error::SidecarVersion { found: self.version, supported: SIDECAR_VERSION });
        }
        if self.version == 0 {
            return Err(Error::Sidecar("version 0 is not valid".into()));
        }
        if self.boxes.is_empty() {
            return Err(Error::Sidecar("no crop boxes recorded".into()));
        }
        let mut geometry = self.original.to_geometry()?;
        let mut chain = Vec::with_capacity(self.boxes.len());
        for (step, b) in self.boxes.iter().enumerate() {
            let bx = VoxelBox { start: b.start, end: b.end };
            let t = CropTransform::new(geometry, bx)
                .map_err(|e| Error::Sidecar(format!("box {step} on dims {:?}: {e}", geometry.dims())))?;
            geometry = t.cropped_geometry();
            chain.push(t);
        }
        Ok(chain)
    }

    /// Geometry of the innermost cropped grid.
    pub fn cropped_geometry(&self) -> Result<ImageGeometry> {
        Ok(self.transforms()?.last().expect("non-empty chain").cropped_geometry())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("sidecar serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let sidecar: Self =
            serde_json::from_str(text).map_err(|e| Error::Sidecar(e.to_string()))?;
        sidecar.transforms()?;
        Ok(sidecar)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geometry() -> ImageGeometry {
        let d = [[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]];
        ImageGeometry::new([20, 16, 12], [0.7, 0.1, 3.3], [-101.3, 7.0, 1e-3], d).unwrap()
    }

    #[test]
    fn json_roundtrip_is_exact() {
        let outer = VoxelBox::new([2, 2, 2], [18, 14, 10], [20, 16, 12]).unwrap();
        let inner = VoxelBox::new([1, 0, 3], [5, 4, 8], outer.extent()).unwrap();
        let s = CropSidecar::new(&geometry(), &[outer, inner]).unwrap();
        let back = CropSidecar::from_json(&s.to_json()).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.original.to_geometry().unwrap(), geometry());
        assert_eq!(back.cropped_geometry().unwrap().dims(), [4, 4, 5]);
    }

    #[test]
    fn from_transforms_matches_boxes() {
        let g = geometry();
        let outer = VoxelBox::new([2, 2, 2], [18, 14, 10], g.dims()).unwrap();
        let t1 = CropTransform::new(g, outer).unwrap();
        let inner = VoxelBox::new([0, 0, 0], [3, 3, 3], outer.extent()).unwrap();
        let t2 = CropTransform::new(t1.cropped_geometry(), inner).unwrap();
        let s = CropSidecar::from_transforms(&[t1, t2]).unwrap();
        assert_eq!(s.transforms().unwrap(), vec![t1, t2]);
        assert!(CropSidecar::from_transforms(&[t2, t1]).is_err());
    }

    #[test]
    fn rejects_tampered_box() {
        let bx = VoxelBox::new([0, 0, 0], [4, 4, 4], [20, 16, 12]).unwrap();
        let mut s = CropSidecar::new(&geometry(), &[bx]).unwrap();
        s.boxes[0].end = [21, 4, 4];
        let err = CropSidecar::from_json(&s.to_json()).unwrap_err();
        assert!(err.to_string().contains("axis 0"), "{err}");
    }

    #[test]
    fn rejects_newer_version_and_foreign_format() {
        let bx = VoxelBox::full([20, 16, 12]);
        let mut s = CropSidecar::new(&geometry(), &[bx]).unwrap();
        s.version = 2;
        assert!(matches!(
            CropSidecar::from_json(&s.to_json()),
            Err(Error::SidecarVersion { found: 2, supported: 1 })
        ));
        s.version = 1;
        s.format = "something-else".into();
        assert!(matches!(CropSidecar::from_json(&s.to_json()), Err(Error::Sidecar(_))));
        assert!(CropSidecar::from_json("{ not json").is_err());
    }
}
