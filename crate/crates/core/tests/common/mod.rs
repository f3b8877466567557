//! Independent brute-force oracles and random fixtures shared by the
//! integration tests. Nothing here calls into the metric or STAPLE code
//! paths it is used to check.

#![allow(dead_code)]

use rand::Rng;
use segkit::geometry::{ImageGeometry, LabelVolume};

/// World centre of voxel `idx` under an axis-aligned or rotated geometry.
pub fn world(g: &ImageGeometry, idx: [usize; 3]) -> [f64; 3] {
    let d = g.direction();
    let s = g.spacing();
    let o = g.offset();
    let mut out = [0.0; 3];
    for r in 0..3 {
        out[r] = o[r]
            + d[r][0] * (idx[0] as f64 * s[0])
            + d[r][1] * (idx[1] as f64 * s[1])
            + d[r][2] * (idx[2] as f64 * s[2]);
    }
    out
}

/// Surface voxels by the literal definition: labelled, with at least one
/// 6-neighbour that is unlabelled or outside the grid.
pub fn surface_points(lv: &LabelVolume, label: u8) -> Vec<[f64; 3]> {
    let g = lv.geometry();
    let [nx, ny, nz] = g.dims();
    let inside = |x: i64, y: i64, z: i64| {
        x >= 0
            && y >= 0
            && z >= 0
            && (x as usize) < nx
            && (y as usize) < ny
            && (z as usize) < nz
            && lv.get([x as usize, y as usize, z as usize]) == Some(label)
    };
    let mut pts = Vec::new();
    for z in 0..nz as i64 {
        for y in 0..ny as i64 {
            for x in 0..nx as i64 {
                if !inside(x, y, z) {
                    continue;
                }
                let exposed = [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)]
                    .iter()
                    .any(|&(dx, dy, dz)| !inside(x + dx, y + dy, z + dz));
                if exposed {
                    pts.push(world(g, [x as usize, y as usize, z as usize]));
                }
            }
        }
    }
    pts
}

/// All-pairs nearest distance from each point of `a` to `b`.
pub fn all_pairs(a: &[[f64; 3]], b: &[[f64; 3]]) -> Vec<f64> {
    a.iter()
        .map(|p| {
            b.iter()
                .map(|q| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt())
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// Linear-interpolated quantile at rank `q·(n−1)`.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let h = q * (v.len() as f64 - 1.0);
    let i = h.floor() as usize;
    if i + 1 >= v.len() {
        return v[v.len() - 1];
    }
    v[i] + (h - i as f64) * (v[i + 1] - v[i])
}

#[derive(Debug, Clone, Copy)]
pub struct OracleMetrics {
    pub dsc: f64,
    pub surface_dice: f64,
    /// `None` when exactly one mask is empty.
    pub masd: Option<f64>,
    pub hd95: Option<f64>,
}

pub fn oracle_metrics(p: &LabelVolume, g: &LabelVolume, label: u8, tol: f64) -> OracleMetrics {
    let np = p.labels().iter().filter(|&&l| l == label).count();
    let ng = g.labels().iter().filter(|&&l| l == label).count();
    let both = p.labels().iter().zip(g.labels()).filter(|(&a, &b)| a == label && b == label).count();
    let dsc = if np + ng == 0 { 1.0 } else { (2 * both) as f64 / (np + ng) as f64 };

    let sp = surface_points(p, label);
    let sg = surface_points(g, label);
    if sp.is_empty() && sg.is_empty() {
        return OracleMetrics { dsc, surface_dice: 1.0, masd: Some(0.0), hd95: Some(0.0) };
    }
    if sp.is_empty() || sg.is_empty() {
        return OracleMetrics { dsc, surface_dice: 0.0, masd: None, hd95: None };
    }
    let d_pg = all_pairs(&sp, &sg);
    let d_gp = all_pairs(&sg, &sp);
    let hits = d_pg.iter().chain(&d_gp).filter(|&&d| d <= tol).count();
    let total = (sp.len() + sg.len()) as f64;
    let masd = (d_pg.iter().sum::<f64>() + d_gp.iter().sum::<f64>()) / total;
    let hd95 = quantile(&d_pg, 0.95).max(quantile(&d_gp, 0.95));
    OracleMetrics { dsc, surface_dice: hits as f64 / total, masd: Some(masd), hd95: Some(hd95) }
}

/// Random label volume with a few blobs of label 1 (and sometimes 2), on a
/// grid of at most `max_dim`³ voxels with spacings in `[0.5, 4]` mm.
pub fn random_geometry<R: Rng>(rng: &mut R, max_dim: usize) -> ImageGeometry {
    let dims = [0; 3].map(|_| rng.gen_range(1..=max_dim));
    let spacing = [0; 3].map(|_| rng.gen_range(0.5..=4.0));
    let offset = [0; 3].map(|_| rng.gen_range(-50.0..50.0));
    ImageGeometry::axis_aligned(dims, spacing, offset).unwrap()
}

pub fn random_mask<R: Rng>(rng: &mut R, g: ImageGeometry) -> LabelVolume {
    let dims = g.dims();
    let mut lv = LabelVolume::zeros(g);
    match rng.gen_range(0..10) {
        // empty mask
        0 => {}
        // salt-and-pepper
        1 | 2 => {
            let density = rng.gen_range(0.05..0.6);
            for z in 0..dims[2] {
                for y in 0..dims[1] {
                    for x in 0..dims[0] {
                        if rng.gen_bool(density) {
                            lv.set([x, y, z], 1).unwrap();
                        }
                    }
                }
            }
        }
        // union of boxes
        _ => {
            for _ in 0..rng.gen_range(1..=3) {
                let lo = dims.map(|d| rng.gen_range(0..d));
                let hi = [0, 1, 2].map(|a| rng.gen_range(lo[a] + 1..=dims[a]));
                let label = if rng.gen_bool(0.8) { 1 } else { 2 };
                for z in lo[2]..hi[2] {
                    for y in lo[1]..hi[1] {
                        for x in lo[0]..hi[0] {
                            lv.set([x, y, z], label).unwrap();
                        }
                    }
                }
            }
        }
    }
    lv
}

/// Plain probability-domain binary STAPLE, voxel by voxel. `masks[j][i]` is
/// rater `j`'s vote on voxel `i`. Returns (posterior, p, q, iterations).
pub fn reference_staple(
    masks: &[Vec<u8>],
    prior: Option<f64>,
    max_iters: usize,
    tol: f64,
) -> (Vec<f64>, Vec<f64>, Vec<f64>, usize) {
    let k = masks.len();
    let n = masks[0].len();
    let f = prior.unwrap_or_else(|| {
        masks.iter().flatten().map(|&d| d as f64).sum::<f64>() / (k * n) as f64
    });
    let clamp = |x: f64| x.clamp(1e-6, 1.0 - 1e-6);
    let mut p = vec![0.99999; k];
    let mut q = vec![0.99999; k];
    let posterior = |p: &[f64], q: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| {
                let mut a = f;
                let mut b = 1.0 - f;
                for j in 0..k {
                    if masks[j][i] == 1 {
                        a *= p[j];
                        b *= 1.0 - q[j];
                    } else {
                        a *= 1.0 - p[j];
                        b *= q[j];
                    }
                }
                a / (a + b)
            })
            .collect()
    };
    let mut iters = 0;
    while iters < max_iters {
        let w = posterior(&p, &q);
        let sw: f64 = w.iter().sum();
        let sbar: f64 = w.iter().map(|x| 1.0 - x).sum();
        let mut change = 0.0;
        for j in 0..k {
            let tp: f64 = (0..n).map(|i| w[i] * masks[j][i] as f64).sum();
            let tn: f64 = (0..n).map(|i| (1.0 - w[i]) * (1 - masks[j][i]) as f64).sum();
            let (np, nq) = (clamp(tp / sw), clamp(tn / sbar));
            change += ((np + nq) - (p[j] + q[j])).abs();
            p[j] = np;
            q[j] = nq;
        }
        iters += 1;
        if change / (k as f64) < tol {
            break;
        }
    }
    (posterior(&p, &q), p, q, iters)
}
