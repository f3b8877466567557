use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use rayon::prelude::*;
use segkit::geometry::Label;
use segkit::{evaluate_case, CaseMetrics, EvaluationReport};
use serde::Deserialize;

use super::{emit, foreground_labels, read_labels};
use crate::exit::{CmdResult, Failure, Outcome};
use crate::report_io;
use crate::{EvaluateArgs, ReportFormat};

#[derive(Debug, Clone)]
struct CasePair {
    case_id: String,
    pred: PathBuf,
    reference: PathBuf,
}

#[derive(Deserialize)]
struct ManifestRow {
    case_id: String,
    pred: PathBuf,
    #[serde(rename = "ref")]
    reference: PathBuf,
}

enum CaseOutcome {
    Rows(Vec<CaseMetrics>),
    Skipped(String),
}

fn is_mha(path: &Path) -> bool {
    path.is_file() && path.extension().is_some_and(|e| e.eq_ignore_ascii_case("mha"))
}

fn case_id_of(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn list_mha(dir: &Path) -> anyhow::Result<BTreeMap<String, PathBuf>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let path = entry?.path();
        if is_mha(&path) {
            out.insert(path.file_name().unwrap().to_string_lossy().into_owned(), path);
        }
    }
    Ok(out)
}

fn read_manifest(path: &Path) -> anyhow::Result<Vec<CasePair>> {
    let base = path.parent().unwrap_or(Path::new("."));
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("reading manifest {}", path.display()))?;
    let mut seen = BTreeSet::new();
    let mut pairs = Vec::new();
    for (line, row) in reader.deserialize::<ManifestRow>().enumerate() {
        let row = row.with_context(|| format!("manifest {} row {}", path.display(), line + 1))?;
        if !seen.insert(row.case_id.clone()) {
            bail!("manifest {}: duplicate case_id {:?}", path.display(), row.case_id);
        }
        pairs.push(CasePair { case_id: row.case_id, pred: base.join(row.pred), reference: base.join(row.reference) });
    }
    Ok(pairs)
}

/// Resolves the case list and the names that could not be paired.
fn collect_pairs(args: &EvaluateArgs) -> Result<(Vec<CasePair>, Vec<String>), Failure> {
    if let Some(manifest) = &args.manifest {
        return Ok((read_manifest(manifest)?, Vec::new()));
    }
    let (pred, reference) = match (&args.pred, &args.reference) {
        (Some(p), Some(r)) => (p, r),
        _ => return Err(Failure::usage("give PRED and REFERENCE, or --manifest")),
    };
    if pred.is_dir() && reference.is_dir() {
        let preds = list_mha(pred)?;
        let refs = list_mha(reference)?;
        let mut pairs = Vec::new();
        let mut unpaired = Vec::new();
        for (name, p) in &preds {
            match refs.get(name) {
                Some(r) => pairs.push(CasePair { case_id: case_id_of(p), pred: p.clone(), reference: r.clone() }),
                None => unpaired.push(format!("{name}: no reference")),
            }
        }
        for name in refs.keys().filter(|n| !preds.contains_key(*n)) {
            unpaired.push(format!("{name}: no prediction"));
        }
        return Ok((pairs, unpaired));
    }
    if pred.is_dir() != reference.is_dir() {
        return Err(Failure::usage("PRED and REFERENCE must both be files or both be directories"));
    }
    let pair = CasePair { case_id: case_id_of(pred), pred: pred.clone(), reference: reference.clone() };
    Ok((vec![pair], Vec::new()))
}

fn evaluate_pair(pair: &CasePair, labels: &[Label], tolerance_mm: f64) -> anyhow::Result<CaseOutcome> {
    let pred = read_labels(&pair.pred)?;
    let reference = read_labels(&pair.reference)?;
    if !pred.geometry().matches(reference.geometry()) {
        return Ok(CaseOutcome::Skipped(format!(
            "{}: geometry mismatch ({})",
            pair.case_id,
            pred.geometry().describe_mismatch(reference.geometry())
        )));
    }
    let rows = labels
        .iter()
        .map(|&l| evaluate_case(&pair.case_id, &pred, &reference, l, tolerance_mm))
        .collect::<Result<Vec<_>, _>>()
        .with_context(|| format!("evaluating {}", pair.case_id))?;
    Ok(CaseOutcome::Rows(rows))
}

pub fn evaluate(args: &EvaluateArgs) -> CmdResult {
    let labels = foreground_labels(&args.labels)?;
    if args.tolerance_mm.is_nan() || args.tolerance_mm < 0.0 {
        return Err(Failure::usage(format!("--tolerance-mm {} must be >= 0", args.tolerance_mm)));
    }
    if args.jobs == Some(0) {
        return Err(Failure::usage("--jobs must be >= 1"));
    }
    let (pairs, unpaired) = collect_pairs(args)?;
    if pairs.is_empty() {
        for u in &unpaired {
            eprintln!("unpaired: {u}");
        }
        return Err(anyhow::anyhow!("no prediction/reference pairs to evaluate").into());
    }

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = args.jobs {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().context("starting worker pool")?;
    // collect() keeps input order, so merging does not depend on scheduling
    let outcomes: Vec<anyhow::Result<CaseOutcome>> = pool.install(|| {
        pairs.par_iter().map(|p| evaluate_pair(p, &labels, args.tolerance_mm)).collect()
    });

    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for outcome in outcomes {
        match outcome? {
            CaseOutcome::Rows(r) => rows.extend(r),
            CaseOutcome::Skipped(why) => skipped.push(why),
        }
    }
    let report = EvaluationReport::new(rows);
    let bytes = match args.format {
        ReportFormat::Csv => report_io::to_csv(&report)?,
        ReportFormat::Json => report_io::to_json(&report, args.tolerance_mm)?,
    };
    match &args.out {
        Some(path) => fs::write(path, &bytes).with_context(|| format!("writing {}", path.display()))?,
        None => emit(&bytes)?,
    }

    for u in &unpaired {
        eprintln!("unpaired: {u}");
    }
    for s in &skipped {
        eprintln!("skipped: {s}");
    }
    if unpaired.is_empty() && skipped.is_empty() {
        Ok(Outcome::Success)
    } else {
        eprintln!(
            "{} case(s) evaluated, {} skipped, {} unpaired",
            pairs.len() - skipped.len(),
            skipped.len(),
            unpaired.len()
        );
        Ok(Outcome::Partial)
    }
}
