use crate::geometry::{Label, LabelVolume};

/// World-coordinate (mm) centres of the surface voxels of one label.
///
/// A voxel is on the surface when it carries the label and at least one of
/// its six face neighbours does not. Neighbours outside the grid count as
/// background, so a mask touching the image border keeps its border face.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfacePointSet {
    pub points: Vec<[f64; 3]>,
    pub source_label: Label,
}

impl SurfacePointSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

pub fn extract_surface(v: &LabelVolume, label: Label) -> SurfacePointSet {
    let g = v.geometry();
    let [nx, ny, nz] = g.dims();
    let labels = v.labels();
    let sx = 1;
    let sy = nx;
    let sz = nx * ny;
    let mut points = Vec::new();
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let i = x + nx * (y + ny * z);
                if labels[i] != label {
                    continue;
                }
                let on_surface = x == 0
                    || x + 1 == nx
                    || y == 0
                    || y + 1 == ny
                    || z == 0
                    || z + 1 == nz
                    || labels[i - sx] != label
                    || labels[i + sx] != label
                    || labels[i - sy] != label
                    || labels[i + sy] != label
                    || labels[i - sz] != label
                    || labels[i + sz] != label;
                if on_surface {
                    points.push(g.index_to_world_unchecked([x, y, z]));
                }
            }
        }
    }
    SurfacePointSet { points, source_label: label }
}
