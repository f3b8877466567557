//! Per-case rows and per-label aggregates of an evaluation batch.

use std::collections::BTreeMap;

use crate::geometry::Label;
use crate::metrics::{rmse_volumes, CaseMetrics};

#[derive(Debug, Clone, PartialEq)]
pub struct LabelAggregate {
    pub label: Label,
    pub cases: usize,
    pub mean_dsc: f64,
    pub mean_surface_dice: f64,
    /// Mean over cases with defined distances; NaN if there are none.
    pub mean_hd95_mm: f64,
    /// Mean over cases with defined distances; NaN if there are none.
    pub mean_masd_mm: f64,
    /// Root mean square volume residual over all cases.
    pub rmse_mm3: f64,
    /// Cases left out of the distance means.
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    /// Sorted by case id, then label.
    pub rows: Vec<CaseMetrics>,
    /// One entry per label, ascending.
    pub aggregates: Vec<LabelAggregate>,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

impl EvaluationReport {
    pub fn new(mut rows: Vec<CaseMetrics>) -> Self {
        rows.sort_by(|a, b| a.case_id.cmp(&b.case_id).then(a.label.cmp(&b.label)));
        let mut by_label: BTreeMap<Label, Vec<&CaseMetrics>> = BTreeMap::new();
        for r in &rows {
            by_label.entry(r.label).or_default().push(r);
        }
        let aggregates = by_label
            .into_iter()
            .map(|(label, group)| {
                let defined = || group.iter().filter(|r| r.distances_defined());
                let volumes: Vec<(f64, f64)> =
                    group.iter().map(|r| (r.vol_pred_mm3, r.vol_ref_mm3)).collect();
                LabelAggregate {
                    label,
                    cases: group.len(),
                    mean_dsc: mean(group.iter().map(|r| r.dsc)),
                    mean_surface_dice: mean(group.iter().map(|r| r.surface_dice_5mm)),
                    mean_hd95_mm: mean(defined().map(|r| r.hd95_mm)),
                    mean_masd_mm: mean(defined().map(|r| r.masd_mm)),
                    rmse_mm3: rmse_volumes(&volumes).expect("group is non-empty"),
                    excluded: group.len() - defined().count(),
                }
            })
            .collect();
        Self { rows, aggregates }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(case: &str, label: Label, dsc: f64, hd: f64, vols: (f64, f64)) -> CaseMetrics {
        CaseMetrics {
            case_id: case.into(),
            label,
            dsc,
            surface_dice_5mm: dsc,
            hd95_mm: hd,
            masd_mm: hd / 2.0,
            vol_pred_mm3: vols.0,
            vol_ref_mm3: vols.1,
        }
    }

    #[test]
    fn aggregates_exclude_undefined_distances() {
        let report = EvaluationReport::new(vec![
            row("b", 1, 0.5, 4.0, (10.0, 7.0)),
            row("a", 1, 1.0, 2.0, (4.0, 4.0)),
            row("c", 1, 0.0, f64::NAN, (0.0, 4.0)),
            row("a", 2, 0.8, 1.0, (1.0, 1.0)),
        ]);
        let ids: Vec<(&str, Label)> = report.rows.iter().map(|r| (r.case_id.as_str(), r.label)).collect();
        assert_eq!(ids, [("a", 1), ("a", 2), ("b", 1), ("c", 1)]);

        let t = &report.aggregates[0];
        assert_eq!((t.label, t.cases, t.excluded), (1, 3, 1));
        assert_eq!(t.mean_dsc, 0.5);
        assert_eq!(t.mean_hd95_mm, 3.0);
        assert_eq!(t.mean_masd_mm, 1.5);
        assert!((t.rmse_mm3 - (25.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(report.aggregates[1].label, 2);
    }

    #[test]
    fn all_undefined_gives_nan_means() {
        let report = EvaluationReport::new(vec![row("a", 1, 0.0, f64::NAN, (0.0, 3.0))]);
        assert!(report.aggregates[0].mean_hd95_mm.is_nan());
        assert_eq!(report.aggregates[0].excluded, 1);
    }
}
