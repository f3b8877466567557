//! Two-phase region-of-interest workflow: a fixed fractional window crop, a
//! prediction-driven crop grown by a millimetre margin, and restoration of
//! cropped predictions to the native grid.

use crate::error::{Error, Result};
use crate::geometry::{
    bounding_box_of_labels, box_from_percent, expand_box_mm, extract_box, CropTransform, Label,
    LabelVolume, Volume, VoxelBox,
};

/// Label ids used by the challenge data.
pub const TUMOR: Label = 1;
pub const PANCREAS: Label = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct TaskPreset {
    pub name: &'static str,
    pub phase1_lo: [f64; 3],
    pub phase1_hi: [f64; 3],
    pub phase2_margin_mm: f64,
    pub phase2_labels: Vec<Label>,
}

impl TaskPreset {
    /// Diagnostic T1 task: the central 10–90 % window on every axis.
    pub fn task1() -> Self {
        Self {
            name: "task1",
            phase1_lo: [0.10, 0.10, 0.10],
            phase1_hi: [0.90, 0.90, 0.90],
            phase2_margin_mm: 30.0,
            phase2_labels: vec![PANCREAS],
        }
    }

    /// MR-Linac T2 task: window derived from the training label extents.
    pub fn task2() -> Self {
        Self {
            name: "task2",
            phase1_lo: [0.3280, 0.323, 0.148],
            phase1_hi: [0.790, 0.705, 1.000],
            phase2_margin_mm: 30.0,
            phase2_labels: vec![PANCREAS],
        }
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "task1" => Some(Self::task1()),
            "task2" => Some(Self::task2()),
            _ => None,
        }
    }

    pub fn with_phase2_labels(mut self, labels: Vec<Label>) -> Self {
        self.phase2_labels = labels;
        self
    }
}

pub fn phase1_box(v: &Volume, preset: &TaskPreset) -> Result<VoxelBox> {
    box_from_percent(v.geometry(), preset.phase1_lo, preset.phase1_hi)
}

pub fn phase1_crop(v: &Volume, preset: &TaskPreset) -> Result<(Volume, CropTransform)> {
    extract_box(v, &phase1_box(v, preset)?)
}

/// Bounding box of the preset's labels in `pred`, grown by the preset margin.
/// An empty prediction is an error; callers typically fall back to the
/// phase-1 box.
pub fn phase2_box(pred: &LabelVolume, preset: &TaskPreset) -> Result<VoxelBox> {
    let tight = bounding_box_of_labels(pred, &preset.phase2_labels).map_err(|e| match e {
        Error::EmptyRegion { labels } => Error::EmptyPrediction { labels },
        other => other,
    })?;
    expand_box_mm(&tight, pred.geometry(), preset.phase2_margin_mm)
}

/// Embeds `pred_cropped` through `transforms` (innermost crop first) back
/// onto the outermost original grid, filling with background.
pub fn restore_to_native(pred_cropped: &LabelVolume, transforms: &[CropTransform]) -> Result<LabelVolume> {
    let mut current = pred_cropped.clone();
    for (step, t) in transforms.iter().enumerate() {
        current = current.embed_box(t).map_err(|e| {
            Error::GeometryMismatch(format!("restoring through crop {step} (innermost = 0): {e}"))
        })?;
    }
    Ok(current)
}
