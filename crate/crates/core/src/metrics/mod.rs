//! Overlap, surface-distance and volume metrics over label volumes, all in
//! physical millimetre space.
//!
//! Empty-mask conventions: when both masks are empty every overlap ratio is
//! 1 and every distance 0; when exactly one is empty the overlap ratios are 0
//! and the distances are undefined ([`Error::UndefinedDistance`], reported as
//! NaN in [`CaseMetrics`]).

mod kdtree;
mod surface;

pub use kdtree::{squared_distance, KdTree};
pub use surface::{extract_surface, SurfacePointSet};

use crate::error::{Error, Result};
use crate::geometry::{Label, LabelVolume};

/// Surface-dice tolerance used for the challenge's "5 mm DSC".
pub const DEFAULT_TOLERANCE_MM: f64 = 5.0;

/// Quantile used by [`hd95`].
pub const HD_QUANTILE: f64 = 0.95;

fn check_geometry(p: &LabelVolume, g: &LabelVolume) -> Result<()> {
    if p.geometry().matches(g.geometry()) {
        Ok(())
    } else {
        Err(Error::GeometryMismatch(p.geometry().describe_mismatch(g.geometry())))
    }
}

/// Dice similarity coefficient `2|P∩G| / (|P|+|G|)` for one label.
pub fn dice(p: &LabelVolume, g: &LabelVolume, label: Label) -> Result<f64> {
    check_geometry(p, g)?;
    let (mut np, mut ng, mut both) = (0usize, 0usize, 0usize);
    for (&a, &b) in p.labels().iter().zip(g.labels()) {
        let (ia, ib) = (a == label, b == label);
        np += ia as usize;
        ng += ib as usize;
        both += (ia && ib) as usize;
    }
    Ok(dice_from_counts(both, np, ng))
}

fn dice_from_counts(both: usize, np: usize, ng: usize) -> f64 {
    if np + ng == 0 {
        1.0
    } else {
        (2 * both) as f64 / (np + ng) as f64
    }
}

/// For each point of `a`, the exact Euclidean distance (mm) to the closest
/// point of `b`.
pub fn directed_distances(a: &SurfacePointSet, b: &SurfacePointSet) -> Result<Vec<f64>> {
    if b.is_empty() {
        return Err(Error::UndefinedDistance);
    }
    Ok(distances_to(&a.points, &KdTree::new(&b.points)))
}

fn distances_to(points: &[[f64; 3]], tree: &KdTree) -> Vec<f64> {
    points
        .iter()
        .map(|p| tree.nearest_distance(p).expect("tree is non-empty"))
        .collect()
}

/// Both directed distance lists between the surfaces of one label.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceDistances {
    /// Distance from each predicted surface point to the reference surface.
    pub pred_to_ref: Vec<f64>,
    /// Distance from each reference surface point to the predicted surface.
    pub ref_to_pred: Vec<f64>,
}

impl SurfaceDistances {
    /// `None` when exactly one surface is empty.
    pub fn compute(sp: &SurfacePointSet, sg: &SurfacePointSet) -> Option<Self> {
        match (sp.is_empty(), sg.is_empty()) {
            (true, true) => Some(Self { pred_to_ref: Vec::new(), ref_to_pred: Vec::new() }),
            (false, false) => Some(Self {
                pred_to_ref: distances_to(&sp.points, &KdTree::new(&sg.points)),
                ref_to_pred: distances_to(&sg.points, &KdTree::new(&sp.points)),
            }),
            _ => None,
        }
    }

    fn is_empty(&self) -> bool {
        self.pred_to_ref.is_empty() && self.ref_to_pred.is_empty()
    }

    pub fn surface_dice(&self, tolerance_mm: f64) -> f64 {
        if self.is_empty() {
            return 1.0;
        }
        let within = |d: &Vec<f64>| d.iter().filter(|&&x| x <= tolerance_mm).count();
        let hits = within(&self.pred_to_ref) + within(&self.ref_to_pred);
        hits as f64 / (self.pred_to_ref.len() + self.ref_to_pred.len()) as f64
    }

    /// Pooled mean of both directed lists.
    pub fn masd(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let total: f64 = self.pred_to_ref.iter().chain(&self.ref_to_pred).sum();
        total / (self.pred_to_ref.len() + self.ref_to_pred.len()) as f64
    }

    /// Larger of the two directed `quantile` percentiles.
    pub fn hausdorff(&self, quantile: f64) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let a = percentile(&self.pred_to_ref, quantile).expect("non-empty");
        let b = percentile(&self.ref_to_pred, quantile).expect("non-empty");
        a.max(b)
    }
}

/// Linear interpolation between order statistics at rank `q·(n−1)`.
///
/// This is the estimator behind every percentile the crate reports; NumPy's
/// default `percentile` uses the same rule.
pub fn percentile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() || !(0.0..=1.0).contains(&q) {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = q * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    Some(sorted[lo] + (sorted[hi] - sorted[lo]) * frac)
}

fn surface_pair(p: &LabelVolume, g: &LabelVolume, label: Label) -> Result<Option<SurfaceDistances>> {
    check_geometry(p, g)?;
    let sp = extract_surface(p, label);
    let sg = extract_surface(g, label);
    Ok(SurfaceDistances::compute(&sp, &sg))
}

/// Fraction of surface points (both directions pooled) lying within
/// `tolerance_mm` of the other surface.
pub fn surface_dice(p: &LabelVolume, g: &LabelVolume, label: Label, tolerance_mm: f64) -> Result<f64> {
    if tolerance_mm.is_nan() || tolerance_mm < 0.0 {
        return Err(Error::InvalidParameter(format!("tolerance {tolerance_mm} mm must be >= 0")));
    }
    Ok(surface_pair(p, g, label)?.map_or(0.0, |d| d.surface_dice(tolerance_mm)))
}

/// Mean average surface distance: pooled mean of both directed distance lists.
pub fn masd(p: &LabelVolume, g: &LabelVolume, label: Label) -> Result<f64> {
    surface_pair(p, g, label)?.map(|d| d.masd()).ok_or(Error::UndefinedDistance)
}

/// 95th-percentile Hausdorff distance.
pub fn hd95(p: &LabelVolume, g: &LabelVolume, label: Label) -> Result<f64> {
    surface_pair(p, g, label)?
        .map(|d| d.hausdorff(HD_QUANTILE))
        .ok_or(Error::UndefinedDistance)
}

/// Labelled volume in mm³: voxel count times voxel volume.
pub fn volume_mm3(v: &LabelVolume, label: Label) -> f64 {
    v.count(label) as f64 * v.geometry().voxel_volume()
}

/// Root mean square of `(predicted − reference)` volume residuals across cases.
pub fn rmse_volumes(cases: &[(f64, f64)]) -> Result<f64> {
    if cases.is_empty() {
        return Err(Error::EmptyInput("RMSE needs at least one case".into()));
    }
    let sum_sq: f64 = cases.iter().map(|(p, r)| (p - r) * (p - r)).sum();
    Ok((sum_sq / cases.len() as f64).sqrt())
}

/// One row of an evaluation report.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseMetrics {
    pub case_id: String,
    pub label: Label,
    pub dsc: f64,
    pub surface_dice_5mm: f64,
    /// NaN when undefined (exactly one mask empty).
    pub hd95_mm: f64,
    /// NaN when undefined (exactly one mask empty).
    pub masd_mm: f64,
    pub vol_pred_mm3: f64,
    pub vol_ref_mm3: f64,
}

impl CaseMetrics {
    pub fn distances_defined(&self) -> bool {
        !(self.hd95_mm.is_nan() || self.masd_mm.is_nan())
    }
}

/// All metrics for one label of one case; surfaces and distance lists are
/// computed once and shared.
pub fn evaluate_case(
    case_id: &str,
    pred: &LabelVolume,
    reference: &LabelVolume,
    label: Label,
    tolerance_mm: f64,
) -> Result<CaseMetrics> {
    let dsc = dice(pred, reference, label)?;
    let surfaces = surface_pair(pred, reference, label)?;
    let (surface_dice_5mm, hd95_mm, masd_mm) = match &surfaces {
        Some(d) => (d.surface_dice(tolerance_mm), d.hausdorff(HD_QUANTILE), d.masd()),
        None => (0.0, f64::NAN, f64::NAN),
    };
    Ok(CaseMetrics {
        case_id: case_id.to_string(),
        label,
        dsc,
        surface_dice_5mm,
        hd95_mm,
        masd_mm,
        vol_pred_mm3: volume_mm3(pred, label),
        vol_ref_mm3: volume_mm3(reference, label),
    })
}
