//! STAPLE expectation-maximisation fusion of binary rater masks, a
//! one-vs-rest multi-label wrapper, and majority voting.
//!
//! For rater `j` with sensitivity `p_j` and specificity `q_j`, and a global
//! foreground prior `f`, the E-step sets the posterior of voxel `i` to
//! `W_i = a_i / (a_i + b_i)` with
//!
//! ```text
//! a_i = f     · Π_j p_j^D_ij · (1 − p_j)^(1 − D_ij)
//! b_i = (1−f) · Π_j q_j^(1 − D_ij) · (1 − q_j)^D_ij
//! ```
//!
//! and the M-step re-estimates
//! `p_j = Σ_i W_i D_ij / Σ_i W_i`, `q_j = Σ_i (1 − W_i)(1 − D_ij) / Σ_i (1 − W_i)`.
//!
//! Voxels sharing the same vote pattern share the same posterior, so the EM
//! runs over the distinct patterns weighted by their voxel counts. Patterns
//! are kept in order of first appearance and the per-voxel log terms are
//! summed in sorted order; together these make the result bit-identical under
//! any permutation of the raters.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::geometry::{ImageGeometry, Label, LabelVolume};

/// Bounds applied to every sensitivity and specificity estimate.
pub const PARAM_CLAMP: (f64, f64) = (1e-6, 1.0 - 1e-6);

/// Raters are packed into a 64-bit vote pattern per voxel.
pub const MAX_RATERS: usize = 64;

/// Aligned binary masks from `K >= 1` raters.
#[derive(Debug, Clone, PartialEq)]
pub struct RaterStack {
    geometry: ImageGeometry,
    masks: Vec<Vec<bool>>,
}

impl RaterStack {
    pub fn new(geometry: ImageGeometry, masks: Vec<Vec<bool>>) -> Result<Self> {
        if masks.is_empty() {
            return Err(Error::EmptyInput("a rater stack needs at least one mask".into()));
        }
        if masks.len() > MAX_RATERS {
            return Err(Error::InvalidParameter(format!(
                "{} raters exceed the supported maximum of {MAX_RATERS}",
                masks.len()
            )));
        }
        let n = geometry.voxel_count();
        if let Some((j, m)) = masks.iter().enumerate().find(|(_, m)| m.len() != n) {
            return Err(Error::DimensionMismatch(format!(
                "rater {j} has {} voxels, expected {n}",
                m.len()
            )));
        }
        Ok(Self { geometry, masks })
    }

    /// `D_ij = 1` where rater `j`'s volume equals `label`.
    pub fn from_label_volumes(volumes: &[LabelVolume], label: Label) -> Result<Self> {
        let geometry = shared_geometry(volumes)?;
        let masks = volumes
            .iter()
            .map(|v| v.labels().iter().map(|&l| l == label).collect())
            .collect();
        Self::new(geometry, masks)
    }

    /// `D_ij = 1` wherever rater `j`'s volume is non-zero.
    pub fn from_binary_volumes(volumes: &[LabelVolume]) -> Result<Self> {
        let geometry = shared_geometry(volumes)?;
        let masks = volumes
            .iter()
            .map(|v| v.labels().iter().map(|&l| l != 0).collect())
            .collect();
        Self::new(geometry, masks)
    }

    pub fn geometry(&self) -> &ImageGeometry {
        &self.geometry
    }

    pub fn masks(&self) -> &[Vec<bool>] {
        &self.masks
    }

    pub fn rater_count(&self) -> usize {
        self.masks.len()
    }

    pub fn voxel_count(&self) -> usize {
        self.geometry.voxel_count()
    }

    /// Mean foreground fraction over all raters and voxels.
    pub fn foreground_fraction(&self) -> f64 {
        let marked: usize = self.masks.iter().map(|m| m.iter().filter(|&&d| d).count()).sum();
        marked as f64 / (self.masks.len() * self.voxel_count()) as f64
    }
}

fn shared_geometry(volumes: &[LabelVolume]) -> Result<ImageGeometry> {
    let first = volumes
        .first()
        .ok_or_else(|| Error::EmptyInput("a rater stack needs at least one mask".into()))?;
    for (j, v) in volumes.iter().enumerate().skip(1) {
        if !v.geometry().matches(first.geometry()) {
            return Err(Error::GeometryMismatch(format!(
                "rater {j}: {}",
                v.geometry().describe_mismatch(first.geometry())
            )));
        }
    }
    Ok(*first.geometry())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Prior {
    /// Mean foreground fraction across raters.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StapleConfig {
    pub prior: Prior,
    pub max_iters: usize,
    /// Convergence threshold on the mean absolute change of `p_j + q_j`.
    pub tol: f64,
    pub init_sensitivity: f64,
    pub init_specificity: f64,
    /// Posterior at or above which a voxel is fused as foreground.
    pub threshold: f64,
}

impl Default for StapleConfig {
    fn default() -> Self {
        Self {
            prior: Prior::Auto,
            max_iters: 100,
            tol: 1e-7,
            init_sensitivity: 0.99999,
            init_specificity: 0.99999,
            threshold: 0.5,
        }
    }
}

impl StapleConfig {
    fn validate(&self) -> Result<()> {
        let open_unit = |x: f64| x > 0.0 && x < 1.0;
        if let Prior::Fixed(f) = self.prior {
            if !open_unit(f) {
                return Err(Error::InvalidParameter(format!("prior {f} must lie in (0, 1)")));
            }
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be >= 1".into()));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::InvalidParameter(format!("tol {} must be > 0", self.tol)));
        }
        for (name, v) in [
            ("initial sensitivity", self.init_sensitivity),
            ("initial specificity", self.init_specificity),
        ] {
            if !open_unit(v) {
                return Err(Error::InvalidParameter(format!("{name} {v} must lie in (0, 1)")));
            }
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::InvalidParameter(format!(
                "threshold {} must lie in [0, 1]",
                self.threshold
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StapleResult {
    pub geometry: ImageGeometry,
    /// Posterior foreground probability per voxel.
    pub posterior: Vec<f64>,
    pub sensitivities: Vec<f64>,
    pub specificities: Vec<f64>,
    /// Foreground prior actually used.
    pub prior: f64,
    /// Number of M-steps performed.
    pub iterations: usize,
    pub converged: bool,
    /// `posterior >= threshold`.
    pub fused: Vec<bool>,
    /// Marginal log-likelihood `Σ_i ln(a_i + b_i)` at the parameters entering
    /// each E-step; the last entry belongs to the returned parameters.
    pub log_likelihood: Vec<f64>,
}

impl StapleResult {
    pub fn fused_volume(&self) -> LabelVolume {
        let labels = self.fused.iter().map(|&f| f as Label).collect();
        LabelVolume::new(self.geometry, labels).expect("fused mask matches geometry")
    }
}

/// Distinct vote patterns in order of first appearance.
struct Patterns {
    codes: Vec<u64>,
    counts: Vec<f64>,
    of_voxel: Vec<u32>,
}

impl Patterns {
    fn new(stack: &RaterStack) -> Self {
        let n = stack.voxel_count();
        let mut index: HashMap<u64, u32> = HashMap::new();
        let mut codes = Vec::new();
        let mut counts: Vec<f64> = Vec::new();
        let mut of_voxel = Vec::with_capacity(n);
        for i in 0..n {
            let code = stack
                .masks
                .iter()
                .enumerate()
                .fold(0u64, |acc, (j, m)| acc | ((m[i] as u64) << j));
            let k = *index.entry(code).or_insert_with(|| {
                codes.push(code);
                counts.push(0.0);
                (codes.len() - 1) as u32
            });
            counts[k as usize] += 1.0;
            of_voxel.push(k);
        }
        Self { codes, counts, of_voxel }
    }
}

struct EStep {
    /// Posterior `W` per pattern.
    weight: Vec<f64>,
    /// `1 − W` per pattern, computed without cancellation.
    complement: Vec<f64>,
    log_likelihood: f64,
}

fn sorted_sum(terms: &mut [f64]) -> f64 {
    terms.sort_by(f64::total_cmp);
    terms.iter().sum()
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn e_step(patterns: &Patterns, k: usize, prior: f64, p: &[f64], q: &[f64]) -> EStep {
    let ln_f = prior.ln();
    let ln_not_f = (1.0 - prior).ln();
    let mut fg_terms = vec![0.0; k];
    let mut bg_terms = vec![0.0; k];
    let mut weight = Vec::with_capacity(patterns.codes.len());
    let mut complement = Vec::with_capacity(patterns.codes.len());
    let mut log_likelihood = 0.0;
    for (&code, &count) in patterns.codes.iter().zip(&patterns.counts) {
        for j in 0..k {
            let voted = code >> j & 1 == 1;
            fg_terms[j] = if voted { p[j].ln() } else { (1.0 - p[j]).ln() };
            bg_terms[j] = if voted { (1.0 - q[j]).ln() } else { q[j].ln() };
        }
        let ln_a = ln_f + sorted_sum(&mut fg_terms);
        let ln_b = ln_not_f + sorted_sum(&mut bg_terms);
        weight.push(1.0 / (1.0 + (ln_b - ln_a).exp()));
        complement.push(1.0 / (1.0 + (ln_a - ln_b).exp()));
        log_likelihood += count * log_add_exp(ln_a, ln_b);
    }
    EStep { weight, complement, log_likelihood }
}

fn clamp(x: f64) -> f64 {
    x.clamp(PARAM_CLAMP.0, PARAM_CLAMP.1)
}

fn m_step(patterns: &Patterns, e: &EStep, p: &mut [f64], q: &mut [f64]) {
    let mut total_fg = 0.0;
    let mut total_bg = 0.0;
    let mut true_pos = vec![0.0; p.len()];
    let mut true_neg = vec![0.0; q.len()];
    for (t, (&code, &count)) in patterns.codes.iter().zip(&patterns.counts).enumerate() {
        let w = count * e.weight[t];
        let w_bar = count * e.complement[t];
        total_fg += w;
        total_bg += w_bar;
        for j in 0..p.len() {
            if code >> j & 1 == 1 {
                true_pos[j] += w;
            } else {
                true_neg[j] += w_bar;
            }
        }
    }
    // an empty class leaves the corresponding estimate where it was
    for j in 0..p.len() {
        if total_fg > 0.0 {
            p[j] = clamp(true_pos[j] / total_fg);
        }
        if total_bg > 0.0 {
            q[j] = clamp(true_neg[j] / total_bg);
        }
    }
}

/// Runs binary STAPLE until the parameters settle or `max_iters` M-steps
/// have been taken.
pub fn staple_binary(stack: &RaterStack, config: &StapleConfig) -> Result<StapleResult> {
    config.validate()?;
    let prior = match config.prior {
        Prior::Fixed(f) => f,
        Prior::Auto => {
            let f = stack.foreground_fraction();
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::DegeneratePrior(f));
            }
            f
        }
    };
    let k = stack.rater_count();
    let patterns = Patterns::new(stack);
    let mut p = vec![clamp(config.init_sensitivity); k];
    let mut q = vec![clamp(config.init_specificity); k];
    let mut log_likelihood = Vec::new();
    let mut iterations = 0;
    let mut converged = false;

    while iterations < config.max_iters {
        let e = e_step(&patterns, k, prior, &p, &q);
        log_likelihood.push(e.log_likelihood);
        let (old_p, old_q) = (p.clone(), q.clone());
        m_step(&patterns, &e, &mut p, &mut q);
        iterations += 1;
        let change: f64 = (0..k)
            .map(|j| ((p[j] + q[j]) - (old_p[j] + old_q[j])).abs())
            .sum::<f64>()
            / k as f64;
        if change < config.tol {
            converged = true;
            break;
        }
    }

    let e = e_step(&patterns, k, prior, &p, &q);
    log_likelihood.push(e.log_likelihood);
    let posterior: Vec<f64> = patterns.of_voxel.iter().map(|&t| e.weight[t as usize]).collect();
    let fused = posterior.iter().map(|&w| w >= config.threshold).collect();
    Ok(StapleResult {
        geometry: stack.geometry,
        posterior,
        sensitivities: p,
        specificities: q,
        prior,
        iterations,
        converged,
        fused,
        log_likelihood,
    })
}

/// Per-voxel label choice from per-label posteriors: the label with the
/// highest posterior among those at or above `threshold`, ties going to the
/// smaller label id, else background.
pub fn fuse_posteriors(posteriors: &[(Label, &[f64])], threshold: f64) -> Vec<Label> {
    let n = posteriors.first().map_or(0, |(_, w)| w.len());
    let mut order: Vec<usize> = (0..posteriors.len()).collect();
    order.sort_by_key(|&i| posteriors[i].0);
    (0..n)
        .map(|i| {
            let mut best: Option<(Label, f64)> = None;
            for &t in &order {
                let (label, w) = (posteriors[t].0, posteriors[t].1[i]);
                if w >= threshold && best.is_none_or(|(_, bw)| w > bw) {
                    best = Some((label, w));
                }
            }
            best.map_or(0, |(l, _)| l)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiLabelStaple {
    pub fused: LabelVolume,
    /// One binary STAPLE run per label that at least one rater used.
    pub per_label: Vec<(Label, StapleResult)>,
    /// Requested labels no rater used (and with an automatic prior), which
    /// contribute zero posterior everywhere.
    pub absent_labels: Vec<Label>,
}

/// One-vs-rest STAPLE over the foreground `labels`, combined with
/// [`fuse_posteriors`].
pub fn staple_multilabel(
    volumes: &[LabelVolume],
    labels: &[Label],
    config: &StapleConfig,
) -> Result<MultiLabelStaple> {
    config.validate()?;
    let mut wanted: Vec<Label> = labels.iter().copied().filter(|&l| l != 0).collect();
    wanted.sort_unstable();
    wanted.dedup();
    if wanted.is_empty() {
        return Err(Error::InvalidParameter("at least one foreground label is required".into()));
    }
    let geometry = shared_geometry(volumes)?;
    let mut per_label = Vec::new();
    let mut absent_labels = Vec::new();
    for &label in &wanted {
        let stack = RaterStack::from_label_volumes(volumes, label)?;
        if config.prior == Prior::Auto && stack.foreground_fraction() == 0.0 {
            absent_labels.push(label);
            continue;
        }
        per_label.push((label, staple_binary(&stack, config)?));
    }
    let posteriors: Vec<(Label, &[f64])> =
        per_label.iter().map(|(l, r)| (*l, r.posterior.as_slice())).collect();
    let fused = if posteriors.is_empty() {
        LabelVolume::zeros(geometry)
    } else {
        LabelVolume::new(geometry, fuse_posteriors(&posteriors, config.threshold))?
    };
    Ok(MultiLabelStaple { fused, per_label, absent_labels })
}

/// Voxel is foreground iff strictly more than half the raters mark it.
pub fn majority_vote(stack: &RaterStack) -> LabelVolume {
    let k = stack.rater_count();
    let labels = (0..stack.voxel_count())
        .map(|i| {
            let votes = stack.masks.iter().filter(|m| m[i]).count();
            (2 * votes > k) as Label
        })
        .collect();
    LabelVolume::new(stack.geometry, labels).expect("stack masks match geometry")
}

/// Label chosen by a strict majority of raters, else background.
pub fn majority_vote_labels(volumes: &[LabelVolume]) -> Result<LabelVolume> {
    let geometry = shared_geometry(volumes)?;
    let k = volumes.len();
    let mut counts = [0usize; 256];
    let labels = (0..geometry.voxel_count())
        .map(|i| {
            counts.iter_mut().for_each(|c| *c = 0);
            for v in volumes {
                counts[v.labels()[i] as usize] += 1;
            }
            (1..=255u8).find(|&l| 2 * counts[l as usize] > k).unwrap_or(0)
        })
        .collect();
    LabelVolume::new(geometry, labels)
}
