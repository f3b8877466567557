use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use segkit::geometry::{bounding_box_of_labels, box_from_percent, embed_box, expand_box_mm, extract_box};
use segkit::roi::phase1_box;
use segkit::{CropSidecar, TaskPreset, Volume, VoxelBox};

use super::{axis_diagnostics, foreground_labels, read_labels, read_volume, write_volume};
use crate::exit::{CmdResult, Failure, Outcome};
use crate::{CropArgs, UncropArgs};

fn default_sidecar_path(out: &Path) -> PathBuf {
    out.with_extension("crop.json")
}

fn read_sidecar(path: &Path) -> anyhow::Result<CropSidecar> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    CropSidecar::from_json(&text).with_context(|| format!("sidecar {}", path.display()))
}

/// Fails with one line per differing axis when `v` is not the grid the
/// sidecar chain ends in.
fn check_against_sidecar(v: &Volume, sidecar: &CropSidecar, what: &Path) -> anyhow::Result<()> {
    let expected = sidecar.cropped_geometry()?;
    if v.geometry().matches(&expected) {
        return Ok(());
    }
    let lines = axis_diagnostics(v.geometry(), &expected);
    Err(anyhow!("{} does not match the sidecar's cropped grid:\n  {}", what.display(), lines.join("\n  ")))
}

fn crop_box(args: &CropArgs, v: &Volume) -> Result<VoxelBox, Failure> {
    if let Some(name) = &args.preset {
        let preset = TaskPreset::by_name(name)
            .ok_or_else(|| Failure::usage(format!("unknown preset {name:?}; expected task1 or task2")))?;
        return Ok(phase1_box(v, &preset)?);
    }
    if let Some(f) = &args.percent {
        if f.len() != 6 {
            return Err(Failure::usage(format!("--percent takes 6 values, got {}", f.len())));
        }
        return Ok(box_from_percent(v.geometry(), [f[0], f[2], f[4]], [f[1], f[3], f[5]])?);
    }
    let path = args.from_labels.as_ref().expect("clap enforces one crop source");
    let labels = foreground_labels(&args.labels)?;
    let lv = read_labels(path)?;
    if !lv.geometry().matches(v.geometry()) {
        return Err(anyhow!(
            "{} is not on the input grid: {}",
            path.display(),
            lv.geometry().describe_mismatch(v.geometry())
        )
        .into());
    }
    let tight = bounding_box_of_labels(&lv, &labels).with_context(|| path.display().to_string())?;
    Ok(expand_box_mm(&tight, v.geometry(), args.margin_mm)?)
}

pub fn crop(args: &CropArgs) -> CmdResult {
    let v = read_volume(&args.input)?;
    let earlier = match &args.chain {
        Some(path) => {
            let sidecar = read_sidecar(path)?;
            check_against_sidecar(&v, &sidecar, &args.input)?;
            sidecar.transforms()?
        }
        None => Vec::new(),
    };
    let bx = crop_box(args, &v)?;
    let (cropped, t) = extract_box(&v, &bx)?;
    let mut chain = earlier;
    chain.push(t);
    let sidecar = CropSidecar::from_transforms(&chain)?;

    write_volume(&args.out, &cropped, args.compress)?;
    let sidecar_path = args.sidecar.clone().unwrap_or_else(|| default_sidecar_path(&args.out));
    fs::write(&sidecar_path, sidecar.to_json()).with_context(|| format!("writing {}", sidecar_path.display()))?;

    let kept = 100.0 * bx.voxel_count() as f64 / v.geometry().voxel_count() as f64;
    let [a, b, c] = cropped.geometry().dims();
    println!("box {:?}..{:?} -> {a} {b} {c} ({kept:.2}% of voxels)", bx.start, bx.end);
    Ok(Outcome::Success)
}

pub fn uncrop(args: &UncropArgs) -> CmdResult {
    let sidecar = read_sidecar(&args.sidecar)?;
    let v = read_volume(&args.input)?;
    check_against_sidecar(&v, &sidecar, &args.input)?;
    let mut current = v;
    for t in sidecar.transforms()?.iter().rev() {
        current = embed_box(&current, t, 0.0)?;
    }
    write_volume(&args.out, &current, args.compress)?;
    Ok(Outcome::Success)
}
