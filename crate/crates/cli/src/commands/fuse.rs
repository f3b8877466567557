use std::fs;

use anyhow::Context;
use segkit::staple::{majority_vote_labels, staple_multilabel, Prior, StapleConfig};
use segkit::LabelVolume;
use serde::Serialize;

use super::{foreground_labels, read_labels, write_volume};
use crate::exit::{CmdResult, Failure, Outcome};
use crate::{FuseArgs, FuseMethod};

#[derive(Serialize)]
struct RaterDiagnostics {
    input: String,
    sensitivity: f64,
    specificity: f64,
}

#[derive(Serialize)]
struct LabelDiagnostics {
    label: u8,
    prior: f64,
    iterations: usize,
    converged: bool,
    raters: Vec<RaterDiagnostics>,
}

#[derive(Serialize)]
struct Diagnostics {
    labels: Vec<LabelDiagnostics>,
    absent_labels: Vec<u8>,
}

fn parse_prior(text: &str) -> Result<Prior, Failure> {
    if text.eq_ignore_ascii_case("auto") {
        return Ok(Prior::Auto);
    }
    text.parse::<f64>()
        .map(Prior::Fixed)
        .map_err(|_| Failure::usage(format!("--prior {text:?}: expected `auto` or a number")))
}

/// Keeps only `labels`; everything else becomes background.
fn restrict(v: &LabelVolume, labels: &[u8]) -> LabelVolume {
    let kept = v.labels().iter().map(|l| if labels.contains(l) { *l } else { 0 }).collect();
    LabelVolume::new(*v.geometry(), kept).expect("same geometry")
}

pub fn fuse(args: &FuseArgs) -> CmdResult {
    let labels = foreground_labels(&args.labels)?;
    let prior = parse_prior(&args.prior)?;
    let volumes = args.inputs.iter().map(|p| read_labels(p)).collect::<anyhow::Result<Vec<_>>>()?;
    let first = volumes[0].geometry();
    for (path, v) in args.inputs.iter().zip(&volumes).skip(1) {
        if !v.geometry().matches(first) {
            return Err(anyhow::anyhow!(
                "{} does not share the geometry of {}: {}",
                path.display(),
                args.inputs[0].display(),
                v.geometry().describe_mismatch(first)
            )
            .into());
        }
    }

    let fused = match args.method {
        FuseMethod::Majority => {
            let restricted: Vec<LabelVolume> = volumes.iter().map(|v| restrict(v, &labels)).collect();
            majority_vote_labels(&restricted)?
        }
        FuseMethod::Staple => {
            let config = StapleConfig {
                prior,
                max_iters: args.max_iters,
                tol: args.tol,
                threshold: args.threshold,
                ..Default::default()
            };
            let result = staple_multilabel(&volumes, &labels, &config)?;
            let diagnostics = Diagnostics {
                labels: result
                    .per_label
                    .iter()
                    .map(|(label, r)| LabelDiagnostics {
                        label: *label,
                        prior: r.prior,
                        iterations: r.iterations,
                        converged: r.converged,
                        raters: args
                            .inputs
                            .iter()
                            .zip(r.sensitivities.iter().zip(&r.specificities))
                            .map(|(path, (&p, &q))| RaterDiagnostics {
                                input: path.display().to_string(),
                                sensitivity: p,
                                specificity: q,
                            })
                            .collect(),
                    })
                    .collect(),
                absent_labels: result.absent_labels.clone(),
            };
            for d in &diagnostics.labels {
                let state = if d.converged { "converged" } else { "not converged" };
                eprintln!("label {}: prior {:.6}, {} iterations, {state}", d.label, d.prior, d.iterations);
                for r in &d.raters {
                    eprintln!("  {}: p {:.6} q {:.6}", r.input, r.sensitivity, r.specificity);
                }
            }
            for l in &diagnostics.absent_labels {
                eprintln!("label {l}: no rater marks it; fused as background");
            }
            if let Some(path) = &args.diagnostics {
                let mut text = serde_json::to_string_pretty(&diagnostics).context("encoding diagnostics")?;
                text.push('\n');
                fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
            }
            result.fused
        }
    };
    write_volume(&args.out, &fused.to_volume(), args.compress)?;
    Ok(Outcome::Success)
}
