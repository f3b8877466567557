//! Report serialization.
//!
//! CSV keeps a fixed eight-column schema. Aggregate footer rows reuse it:
//! `case_id` is `AGGREGATE`, the metric columns hold per-label means,
//! `vol_pred_mm3` holds the volume RMSE and `vol_ref_mm3` the number of
//! cases left out of the distance means.

use serde::Serialize;
use segkit::{CaseMetrics, EvaluationReport, LabelAggregate};

pub const CSV_HEADER: [&str; 8] = [
    "case_id",
    "label",
    "dsc",
    "surface_dice_5mm",
    "hd95_mm",
    "masd_mm",
    "vol_pred_mm3",
    "vol_ref_mm3",
];

pub const AGGREGATE_KEY: &str = "AGGREGATE";

fn num(v: f64) -> String {
    // shortest round-trip form; NaN prints as "NaN"
    format!("{v}")
}

pub fn to_csv(report: &EvaluationReport) -> anyhow::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for r in &report.rows {
        w.write_record([
            r.case_id.clone(),
            r.label.to_string(),
            num(r.dsc),
            num(r.surface_dice_5mm),
            num(r.hd95_mm),
            num(r.masd_mm),
            num(r.vol_pred_mm3),
            num(r.vol_ref_mm3),
        ])?;
    }
    for a in &report.aggregates {
        w.write_record([
            AGGREGATE_KEY.to_string(),
            a.label.to_string(),
            num(a.mean_dsc),
            num(a.mean_surface_dice),
            num(a.mean_hd95_mm),
            num(a.mean_masd_mm),
            num(a.rmse_mm3),
            a.excluded.to_string(),
        ])?;
    }
    Ok(w.into_inner()?)
}

/// JSON has no NaN; undefined values become `null`.
fn defined(v: f64) -> Option<f64> {
    (!v.is_nan()).then_some(v)
}

#[derive(Serialize)]
struct JsonRow<'a> {
    case_id: &'a str,
    label: u8,
    dsc: f64,
    surface_dice_5mm: f64,
    hd95_mm: Option<f64>,
    masd_mm: Option<f64>,
    vol_pred_mm3: f64,
    vol_ref_mm3: f64,
}

#[derive(Serialize)]
struct JsonAggregate {
    label: u8,
    cases: usize,
    mean_dsc: f64,
    mean_surface_dice_5mm: f64,
    mean_hd95_mm: Option<f64>,
    mean_masd_mm: Option<f64>,
    rmse_mm3: f64,
    excluded_from_distance_means: usize,
}

#[derive(Serialize)]
struct JsonReport<'a> {
    tolerance_mm: f64,
    rows: Vec<JsonRow<'a>>,
    aggregates: Vec<JsonAggregate>,
}

impl<'a> From<&'a CaseMetrics> for JsonRow<'a> {
    fn from(r: &'a CaseMetrics) -> Self {
        Self {
            case_id: &r.case_id,
            label: r.label,
            dsc: r.dsc,
            surface_dice_5mm: r.surface_dice_5mm,
            hd95_mm: defined(r.hd95_mm),
            masd_mm: defined(r.masd_mm),
            vol_pred_mm3: r.vol_pred_mm3,
            vol_ref_mm3: r.vol_ref_mm3,
        }
    }
}

impl From<&LabelAggregate> for JsonAggregate {
    fn from(a: &LabelAggregate) -> Self {
        Self {
            label: a.label,
            cases: a.cases,
            mean_dsc: a.mean_dsc,
            mean_surface_dice_5mm: a.mean_surface_dice,
            mean_hd95_mm: defined(a.mean_hd95_mm),
            mean_masd_mm: defined(a.mean_masd_mm),
            rmse_mm3: a.rmse_mm3,
            excluded_from_distance_means: a.excluded,
        }
    }
}

pub fn to_json(report: &EvaluationReport, tolerance_mm: f64) -> anyhow::Result<Vec<u8>> {
    let doc = JsonReport {
        tolerance_mm,
        rows: report.rows.iter().map(JsonRow::from).collect(),
        aggregates: report.aggregates.iter().map(JsonAggregate::from).collect(),
    };
    let mut out = serde_json::to_vec_pretty(&doc)?;
    out.push(b'\n');
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nan_distances_print_as_nan() {
        let report = EvaluationReport::new(vec![CaseMetrics {
            case_id: "a".into(),
            label: 1,
            dsc: 0.0,
            surface_dice_5mm: 0.0,
            hd95_mm: f64::NAN,
            masd_mm: f64::NAN,
            vol_pred_mm3: 0.0,
            vol_ref_mm3: 8.0,
        }]);
        let text = String::from_utf8(to_csv(&report).unwrap()).unwrap();
        assert_eq!(
            text,
            "case_id,label,dsc,surface_dice_5mm,hd95_mm,masd_mm,vol_pred_mm3,vol_ref_mm3\n\
             a,1,0,0,NaN,NaN,0,8\n\
             AGGREGATE,1,0,0,NaN,NaN,8,1\n"
        );
        let json: serde_json::Value = serde_json::from_slice(&to_json(&report, 5.0).unwrap()).unwrap();
        assert!(json["rows"][0]["hd95_mm"].is_null());
        assert_eq!(json["aggregates"][0]["excluded_from_distance_means"], 1);
    }
}
