//! Segmentation toolkit: MetaImage volume I/O, region-of-interest crop and
//! restore, STAPLE fusion, and challenge-style evaluation metrics.

pub mod error;
pub mod geometry;
pub mod metrics;
pub mod mha;
pub mod report;
pub mod roi;
pub mod sidecar;
pub mod staple;

pub use error::{Error, Result};
pub use geometry::{
    bounding_box_of_labels, box_from_percent, embed_box, expand_box_mm, extract_box, CropTransform,
    ElementKind, ImageGeometry, Label, LabelVolume, Volume, VoxelBox, VoxelData,
};
pub use metrics::{evaluate_case, CaseMetrics};
pub use mha::{read_mha, read_mha_file, write_mha, write_mha_file};
pub use report::{EvaluationReport, LabelAggregate};
pub use roi::TaskPreset;
pub use sidecar::CropSidecar;
pub use staple::{RaterStack, StapleConfig, StapleResult};
