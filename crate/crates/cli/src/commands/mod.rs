mod crop;
mod evaluate;
mod fuse;

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::Context;
use segkit::geometry::{ImageGeometry, Label};
use segkit::mha::element_type_name;
use segkit::{read_mha_file, write_mha_file, LabelVolume, Volume};

use crate::exit::{CmdResult, Failure, Outcome};

pub use crop::{crop, uncrop};
pub use evaluate::evaluate;
pub use fuse::fuse;

/// Histograms with more distinct values than this are summarized.
const MAX_HISTOGRAM_ROWS: usize = 256;

pub(crate) fn read_volume(path: &Path) -> anyhow::Result<Volume> {
    read_mha_file(path).with_context(|| format!("reading {}", path.display()))
}

pub(crate) fn read_labels(path: &Path) -> anyhow::Result<LabelVolume> {
    let v = read_volume(path)?;
    LabelVolume::from_volume(&v).with_context(|| format!("{} is not a label volume", path.display()))
}

pub(crate) fn write_volume(path: &Path, v: &Volume, compress: bool) -> anyhow::Result<()> {
    write_mha_file(path, v, compress).with_context(|| format!("writing {}", path.display()))
}

/// Foreground labels, deduplicated and sorted.
pub(crate) fn foreground_labels(labels: &[Label]) -> Result<Vec<Label>, Failure> {
    let mut out = labels.to_vec();
    out.sort_unstable();
    out.dedup();
    if out.is_empty() {
        return Err(Failure::usage("--labels needs at least one label"));
    }
    if out.contains(&0) {
        return Err(Failure::usage("label 0 is background and cannot be selected"));
    }
    Ok(out)
}

fn join<T: std::fmt::Display>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

/// Per-axis differences between a found and an expected geometry.
pub(crate) fn axis_diagnostics(found: &ImageGeometry, expected: &ImageGeometry) -> Vec<String> {
    const AXES: [&str; 3] = ["x", "y", "z"];
    let mut out = Vec::new();
    let (fd, ed) = (found.dims(), expected.dims());
    let (fs, es) = (found.spacing(), expected.spacing());
    let (fo, eo) = (found.offset(), expected.offset());
    for a in 0..3 {
        if fd[a] != ed[a] {
            out.push(format!("axis {}: input has {} voxels, expected {}", AXES[a], fd[a], ed[a]));
        }
        if (fs[a] - es[a]).abs() > 1e-6 * es[a].abs().max(1.0) {
            out.push(format!("axis {}: spacing {} mm, expected {}", AXES[a], fs[a], es[a]));
        }
        if (fo[a] - eo[a]).abs() > 1e-6 * eo[a].abs().max(1.0) {
            out.push(format!("axis {}: offset {} mm, expected {}", AXES[a], fo[a], eo[a]));
        }
    }
    if out.is_empty() && !found.matches(expected) {
        out.push(format!("direction {:?}, expected {:?}", found.direction(), expected.direction()));
    }
    out
}

pub fn info(path: &Path) -> CmdResult {
    use std::fmt::Write as _;
    let v = read_volume(path)?;
    let g = v.geometry();
    let mut s = String::new();
    writeln!(s, "file: {}", path.display())?;
    writeln!(s, "dims: {}", join(&g.dims()))?;
    writeln!(s, "spacing: {}", join(&g.spacing()))?;
    writeln!(s, "offset: {}", join(&g.offset()))?;
    writeln!(s, "direction: {}", join(&g.direction().concat()))?;
    writeln!(s, "element type: {}", element_type_name(v.element_kind()))?;
    writeln!(s, "voxels: {}", g.voxel_count())?;
    if v.element_kind().is_integer() {
        let mut hist: BTreeMap<i64, usize> = BTreeMap::new();
        for i in 0..v.data().len() {
            *hist.entry(v.data().get_f64(i) as i64).or_default() += 1;
        }
        if hist.len() > MAX_HISTOGRAM_ROWS {
            let (lo, hi) = (hist.keys().next().unwrap(), hist.keys().next_back().unwrap());
            writeln!(s, "histogram: {} distinct values in [{lo}, {hi}]", hist.len())?;
        } else {
            writeln!(s, "histogram:")?;
            for (value, count) in hist {
                writeln!(s, "  {value}: {count}")?;
            }
        }
    }
    emit(s.as_bytes())?;
    Ok(Outcome::Success)
}

/// Writes to standard output; a closed pipe is not an error.
pub(crate) fn emit(bytes: &[u8]) -> anyhow::Result<()> {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    match out.write_all(bytes).and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(anyhow::Error::from(e).context("writing to stdout")),
        _ => Ok(()),
    }
}
