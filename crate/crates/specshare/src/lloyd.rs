//! Lloyd-type codebook and partition design at fixed dual prices.
//!
//! At fixed `lambda` (power price) and `mu` (interference price) the
//! quantized design problem for one band is: choose `L` power levels and a
//! partition of the `(g0, g1)` plane to maximize
//!
//! ```text
//! sum_j E[ log(1 + g1 p_j) - (lambda + mu g0) p_j | R_j ] Pr(R_j)
//! ```
//!
//! The alternation mirrors vector quantizer training.  The assignment step
//! gives each training sample to the level with the best score (nearest
//! neighbour in objective terms); the update step moves each level to the
//! root of its region's stationarity condition
//! `E[ g1/(1+g1 p) | R ] = lambda + mu E[ g0 | R ]`, clamped at zero.  Each
//! step can only raise the objective, so the iteration trace is monotone.
//!
//! The decision boundary between two adjacent levels has a closed form in
//! the gain plane ([`boundary_g1`]), which converged codebooks must respect:
//! boundaries stay above the zero-power line `g1 = lambda + mu g0`, levels
//! are strictly decreasing, and all but the last are positive.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fading::BandView;
use crate::numeric::pairwise_sum;
use crate::{Error, Result};

/// Default relative tolerance on the Lagrangian change per iteration.
pub const DEFAULT_TOL: f64 = 1e-6;
/// Default iteration budget.
pub const DEFAULT_MAX_ITER: usize = 500;
/// Residual tolerance for the level-update root solve (conditional mean).
pub const TOL_ROOT: f64 = 1e-10;

/// A power codebook: `levels[0]` is the largest power by convention once a
/// design has converged (index 0 naturally maps to the all-zeros feedback
/// label).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerCodebook {
    pub levels: Vec<f64>,
}

impl PowerCodebook {
    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }
}

/// Sample-to-level assignment over a training band.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    /// Level index per training sample.
    pub labels: Vec<u32>,
    /// Samples per level.
    pub counts: Vec<usize>,
}

impl Partition {
    /// Empirical probability mass of region `j`.
    pub fn mass(&self, j: usize) -> f64 {
        self.counts[j] as f64 / self.labels.len() as f64
    }
}

/// Progress record of one design run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GlaReport {
    pub iterations: usize,
    pub converged: bool,
    /// Objective value after every iteration.
    pub trace: Vec<f64>,
    /// Final objective value.
    pub lagrangian: f64,
    /// `true` when the trace never decreased by more than `1e-12`.
    pub monotone: bool,
    /// Number of empty-region reseeds performed.
    pub reseeds: usize,
}

/// Codebook initialization for a design run.
#[derive(Clone, Debug)]
pub enum CodebookInit {
    /// Water-filling powers at the mid-quantiles `(2k-1)/(2L)` of the
    /// per-sample full-knowledge power distribution (deterministic).
    Quantile,
    /// Uniform levels in `(0, p_max]` drawn from a seeded stream, for
    /// restarts.
    Random { seed: u64 },
    /// Explicit starting levels.
    Levels(Vec<f64>),
}

/// Result of [`run_gla`].
#[derive(Clone, Debug)]
pub struct GlaOutcome {
    pub codebook: PowerCodebook,
    pub partition: Partition,
    pub report: GlaReport,
}

// ---------------------------------------------------------------------------
// scores and assignment

#[inline]
pub(crate) fn score(g1: f64, w: f64, p: f64) -> f64 {
    (g1 * p).ln_1p() - w * p
}

/// Assign every sample to its best level: `argmax_j log(1+g1 p_j) - w p_j`,
/// ties resolved toward the lowest index.
pub fn nnc_assign(band: BandView<'_>, codebook: &PowerCodebook, lambda: f64, mu: f64) -> Result<Partition> {
    validate_duals(lambda, mu)?;
    if band.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if codebook.is_empty() {
        return Err(Error::Config("empty codebook".into()));
    }
    let labels = assign_labels(band, &codebook.levels, lambda, mu, None);
    Ok(partition_from_labels(labels, codebook.len()))
}

pub(crate) fn assign_labels(
    band: BandView<'_>,
    levels: &[f64],
    lambda: f64,
    mu: f64,
    rho: Option<&[Vec<f64>]>,
) -> Vec<u32> {
    let l = levels.len();
    let g0 = band.g0;
    let g1 = band.g1;
    (0..band.len())
        .into_par_iter()
        .with_min_len(4096)
        .map(|s| {
            let w = lambda + mu * g0[s];
            let mut best = 0u32;
            let mut best_v = f64::NEG_INFINITY;
            match rho {
                None => {
                    for (k, &p) in levels.iter().enumerate() {
                        let v = score(g1[s], w, p);
                        if v > best_v {
                            best_v = v;
                            best = k as u32;
                        }
                    }
                }
                Some(rho) => {
                    let scores: Vec<f64> =
                        levels.iter().map(|&p| score(g1[s], w, p)).collect();
                    for j in 0..l {
                        let mut v = 0.0;
                        for (k, sk) in scores.iter().enumerate() {
                            v += rho[k][j] * sk;
                        }
                        if v > best_v {
                            best_v = v;
                            best = j as u32;
                        }
                    }
                }
            }
            best
        })
        .collect()
}

pub(crate) fn partition_from_labels(labels: Vec<u32>, l: usize) -> Partition {
    let mut counts = vec![0usize; l];
    for &lab in &labels {
        counts[lab as usize] += 1;
    }
    Partition { labels, counts }
}

// ---------------------------------------------------------------------------
// level update

/// Solve one region's stationarity condition for its power level.
///
/// Returns `None` for an empty region (the caller chooses a policy),
/// `Some(0.0)` exactly when `E[g1 | R] <= lambda + mu E[g0 | R]`, otherwise
/// the positive root of `E[g1/(1+g1 p) | R] = lambda + mu E[g0 | R]`,
/// located by bisection on `[0, max water-filling power in region]` to a
/// conditional-mean residual below [`TOL_ROOT`].
pub fn centroid_power(region: BandView<'_>, lambda: f64, mu: f64) -> Result<Option<f64>> {
    validate_duals(lambda, mu)?;
    let n = region.len();
    let weights = vec![1.0; n];
    Ok(weighted_centroid(region.g0, region.g1, &weights, lambda, mu))
}

/// Weighted form shared with the feedback-error-aware update: weights are
/// per-sample nonnegative contribution masses.
pub(crate) fn weighted_centroid(
    g0: &[f64],
    g1: &[f64],
    weights: &[f64],
    lambda: f64,
    mu: f64,
) -> Option<f64> {
    let mut w_total = 0.0;
    let mut penalty_sum = 0.0;
    let mut gain_sum = 0.0;
    let mut p_ub = 0.0;
    for i in 0..g0.len() {
        let wt = weights[i];
        if wt == 0.0 {
            continue;
        }
        let pen = lambda + mu * g0[i];
        w_total += wt;
        penalty_sum += wt * pen;
        gain_sum += wt * g1[i];
        let cap = 1.0 / pen - 1.0 / g1[i];
        if cap > p_ub {
            p_ub = cap;
        }
    }
    if w_total == 0.0 {
        return None;
    }
    if gain_sum <= penalty_sum {
        return Some(0.0);
    }
    // A sample with zero water penalty (lambda = 0 and g0 = 0) has an
    // unbounded water-filling power; keep the bracket finite.
    let p_ub = p_ub.min(1e15);
    // Residual of the conditional stationarity condition, normalized to a
    // per-unit-mass scale.  Decreasing and convex in p; positive at 0 by the
    // clamp test above; nonpositive at the largest in-region water-filling
    // power.  Convexity makes Newton from the left edge approach the root
    // monotonically, so the bracketed fallback below almost never fires; it
    // guards against derivative underflow on extreme tails.
    let residual = |p: f64| -> (f64, f64) {
        let mut acc = 0.0;
        let mut slope = 0.0;
        for i in 0..g0.len() {
            let wt = weights[i];
            if wt == 0.0 {
                continue;
            }
            let q = g1[i] / (1.0 + g1[i] * p);
            acc += wt * q;
            slope -= wt * q * q;
        }
        ((acc - penalty_sum) / w_total, slope / w_total)
    };
    let mut lo = 0.0;
    let mut hi = p_ub;
    let mut p = 0.0;
    let (mut f, mut df) = residual(0.0);
    for _ in 0..200 {
        if f.abs() < TOL_ROOT {
            break;
        }
        if f > 0.0 {
            lo = p;
        } else {
            hi = p;
        }
        let step = if df < 0.0 { p - f / df } else { f64::NAN };
        let next = if step.is_finite() && step > lo && step < hi {
            step
        } else {
            0.5 * (lo + hi)
        };
        if (next - p).abs() <= 1e-14 * next.abs().max(1.0) {
            p = next;
            break;
        }
        p = next;
        let (fv, dfv) = residual(p);
        f = fv;
        df = dfv;
    }
    Some(p)
}

pub(crate) fn validate_duals(lambda: f64, mu: f64) -> Result<()> {
    if !(lambda.is_finite() && mu.is_finite()) || lambda < 0.0 || mu < 0.0 {
        return Err(Error::Config(format!(
            "multipliers must be finite and nonnegative: lambda={lambda}, mu={mu}"
        )));
    }
    if lambda == 0.0 && mu == 0.0 {
        return Err(Error::UndefinedWaterLevel);
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// objective

/// Empirical design objective for an assignment:
/// `mean_s [ log(1+g1 p_label) - (lambda + mu g0) p_label ]`.
pub fn lagrangian_value(
    band: BandView<'_>,
    partition: &Partition,
    codebook: &PowerCodebook,
    lambda: f64,
    mu: f64,
) -> Result<f64> {
    validate_duals(lambda, mu)?;
    if partition.labels.len() != band.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {} samples",
            partition.labels.len(),
            band.len()
        )));
    }
    Ok(lagrangian(band, &partition.labels, &codebook.levels, lambda, mu, None))
}

fn lagrangian(
    band: BandView<'_>,
    labels: &[u32],
    levels: &[f64],
    lambda: f64,
    mu: f64,
    rho: Option<&[Vec<f64>]>,
) -> f64 {
    let g0 = band.g0;
    let g1 = band.g1;
    let terms: Vec<f64> = (0..band.len())
        .into_par_iter()
        .with_min_len(4096)
        .map(|s| {
            let w = lambda + mu * g0[s];
            match rho {
                None => score(g1[s], w, levels[labels[s] as usize]),
                Some(rho) => {
                    let j = labels[s] as usize;
                    let mut v = 0.0;
                    for (k, &p) in levels.iter().enumerate() {
                        v += rho[k][j] * score(g1[s], w, p);
                    }
                    v
                }
            }
        })
        .collect();
    pairwise_sum(&terms) / band.len() as f64
}

// ---------------------------------------------------------------------------
// the iteration engine (shared with the feedback-error-aware variant)

pub(crate) struct EngineOutcome {
    pub levels: Vec<f64>,
    pub labels: Vec<u32>,
    pub report: GlaReport,
}

/// One full design run.  `rho[k][j]` is the probability that transmitted
/// index `j` is received as `k`; `None` means the feedback link is perfect.
pub(crate) fn engine_run(
    band: BandView<'_>,
    mut levels: Vec<f64>,
    lambda: f64,
    mu: f64,
    rho: Option<&[Vec<f64>]>,
    tol: f64,
    max_iter: usize,
) -> EngineOutcome {
    let l = levels.len();
    let n = band.len();
    let mut labels;
    let mut trace = Vec::new();
    let mut reseeds = 0usize;
    let mut converged = false;
    let mut prev = f64::NEG_INFINITY;

    loop {
        labels = assign_labels(band, &levels, lambda, mu, rho);
        let mut counts = count_labels(&labels, l);

        // Reseed levels that no longer influence the objective (zero total
        // update weight; with perfect feedback that is exactly an empty
        // region).  The level moves to the clamped water-filling power of
        // the worst-served sample, which leaves the objective unchanged and
        // lets the next assignment claim samples for it.
        let mut attempts = 0;
        while attempts < l {
            let dead = (0..l).find(|&k| level_weight(k, &counts, rho, n) == 0.0);
            let Some(k) = dead else { break };
            let target = worst_served_power(band, &levels, &labels, lambda, mu, rho);
            if (target - levels[k]).abs() <= f64::EPSILON * target.abs() {
                break; // reseeding would not move the level
            }
            levels[k] = target;
            reseeds += 1;
            attempts += 1;
            labels = assign_labels(band, &levels, lambda, mu, rho);
            counts = count_labels(&labels, l);
            if level_weight(k, &counts, rho, n) == 0.0 {
                break; // still unused; keep it and move on
            }
        }

        update_levels(band, &mut levels, &labels, &counts, lambda, mu, rho);

        let cur = lagrangian(band, &labels, &levels, lambda, mu, rho);
        trace.push(cur);
        if prev.is_finite() && (cur - prev).abs() <= tol * prev.abs().max(1.0) {
            converged = true;
            break;
        }
        prev = cur;
        if trace.len() >= max_iter {
            break;
        }
    }

    labels = assign_labels(band, &levels, lambda, mu, rho);
    let monotone = trace
        .windows(2)
        .all(|w| w[1] >= w[0] - 1e-12 * w[0].abs().max(1.0));
    let lagr = *trace.last().unwrap_or(&f64::NAN);
    EngineOutcome {
        levels,
        labels,
        report: GlaReport {
            iterations: trace.len(),
            converged,
            trace,
            lagrangian: lagr,
            monotone,
            reseeds,
        },
    }
}

fn count_labels(labels: &[u32], l: usize) -> Vec<usize> {
    let mut counts = vec![0usize; l];
    for &lab in labels {
        counts[lab as usize] += 1;
    }
    counts
}

/// Total update weight of level `k`: its own region mass with perfect
/// feedback, or the rho-mixed mass otherwise.
fn level_weight(k: usize, counts: &[usize], rho: Option<&[Vec<f64>]>, n: usize) -> f64 {
    match rho {
        None => counts[k] as f64 / n as f64,
        Some(rho) => counts
            .iter()
            .enumerate()
            .map(|(j, &c)| rho[k][j] * c as f64 / n as f64)
            .sum(),
    }
}

/// Clamped water-filling power of the worst-served sample: the one whose
/// achieved score falls farthest below its private optimum.  (Selecting by
/// lowest achieved score instead would often pick an arbitrary sample that
/// is already at its optimum — every sample parked at a zero level scores
/// exactly zero — and the reseed would go nowhere.)
fn worst_served_power(
    band: BandView<'_>,
    levels: &[f64],
    labels: &[u32],
    lambda: f64,
    mu: f64,
    rho: Option<&[Vec<f64>]>,
) -> f64 {
    let mut best_regret = f64::NEG_INFINITY;
    let mut target = 0.0;
    for s in 0..band.len() {
        let w = lambda + mu * band.g0[s];
        let cap = (1.0 / w - 1.0 / band.g1[s]).clamp(0.0, 1e15);
        let ideal = score(band.g1[s], w, cap);
        let achieved = match rho {
            None => score(band.g1[s], w, levels[labels[s] as usize]),
            Some(rho) => {
                let j = labels[s] as usize;
                levels
                    .iter()
                    .enumerate()
                    .map(|(k, &p)| rho[k][j] * score(band.g1[s], w, p))
                    .sum()
            }
        };
        let regret = ideal - achieved;
        if regret > best_regret {
            best_regret = regret;
            target = cap;
        }
    }
    target
}

fn update_levels(
    band: BandView<'_>,
    levels: &mut [f64],
    labels: &[u32],
    counts: &[usize],
    lambda: f64,
    mu: f64,
    rho: Option<&[Vec<f64>]>,
) {
    match rho {
        None => {
            // Gather region sample indices once, then update disjoint regions.
            let l = levels.len();
            let mut by_region: Vec<Vec<u32>> = vec![Vec::new(); l];
            for (k, c) in counts.iter().enumerate() {
                by_region[k].reserve(*c);
            }
            for (s, &lab) in labels.iter().enumerate() {
                by_region[lab as usize].push(s as u32);
            }
            let updated: Vec<Option<f64>> = by_region
                .par_iter()
                .map(|idxs| {
                    if idxs.is_empty() {
                        return None;
                    }
                    let g0: Vec<f64> = idxs.iter().map(|&s| band.g0[s as usize]).collect();
                    let g1: Vec<f64> = idxs.iter().map(|&s| band.g1[s as usize]).collect();
                    let ones = vec![1.0; g0.len()];
                    weighted_centroid(&g0, &g1, &ones, lambda, mu)
                })
                .collect();
            for (k, v) in updated.into_iter().enumerate() {
                if let Some(p) = v {
                    levels[k] = p;
                }
            }
        }
        Some(rho) => {
            let l = levels.len();
            let updated: Vec<Option<f64>> = (0..l)
                .into_par_iter()
                .map(|k| {
                    let mut wts = vec![0.0; band.len()];
                    for (s, &lab) in labels.iter().enumerate() {
                        wts[s] = rho[k][lab as usize];
                    }
                    weighted_centroid(band.g0, band.g1, &wts, lambda, mu)
                })
                .collect();
            for (k, v) in updated.into_iter().enumerate() {
                if let Some(p) = v {
                    levels[k] = p;
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// public run

/// Design a codebook for one band at fixed duals.
///
/// Levels are reported in decreasing order with the partition relabeled to
/// match.  The report carries the full objective trace; the iteration stops
/// when the relative objective change drops below `tol` or after `max_iter`
/// iterations.
pub fn run_gla(
    band: BandView<'_>,
    l: usize,
    lambda: f64,
    mu: f64,
    init: &CodebookInit,
    tol: f64,
    max_iter: usize,
) -> Result<GlaOutcome> {
    validate_duals(lambda, mu)?;
    if band.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if l == 0 {
        return Err(Error::Config("codebook needs at least one level".into()));
    }
    let levels = initial_levels(band, l, lambda, mu, init)?;
    let out = engine_run(band, levels, lambda, mu, None, tol, max_iter);

    // Sort levels descending and remap labels (sample scores are unchanged
    // by the permutation).
    let mut order: Vec<usize> = (0..l).collect();
    order.sort_by(|&a, &b| out.levels[b].partial_cmp(&out.levels[a]).unwrap());
    let mut perm = vec![0u32; l];
    for (new_idx, &old_idx) in order.iter().enumerate() {
        perm[old_idx] = new_idx as u32;
    }
    let levels: Vec<f64> = order.iter().map(|&i| out.levels[i]).collect();
    let labels: Vec<u32> = out.labels.iter().map(|&lab| perm[lab as usize]).collect();
    Ok(GlaOutcome {
        codebook: PowerCodebook { levels },
        partition: partition_from_labels(labels, l),
        report: out.report,
    })
}

/// Compute starting levels for a design run.
pub(crate) fn initial_levels(
    band: BandView<'_>,
    l: usize,
    lambda: f64,
    mu: f64,
    init: &CodebookInit,
) -> Result<Vec<f64>> {
    match init {
        CodebookInit::Levels(levels) => {
            if levels.len() != l {
                return Err(Error::DimensionMismatch(format!(
                    "{} initial levels for codebook size {}",
                    levels.len(),
                    l
                )));
            }
            if levels.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::Config("initial levels must be finite and nonnegative".into()));
            }
            Ok(levels.clone())
        }
        CodebookInit::Quantile => {
            let mut caps: Vec<f64> = (0..band.len())
                .map(|s| {
                    let pen = lambda + mu * band.g0[s];
                    (1.0 / pen - 1.0 / band.g1[s]).clamp(0.0, 1e15)
                })
                .collect();
            caps.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let n = caps.len();
            let mut levels: Vec<f64> = (1..=l)
                .map(|k| {
                    let idx = ((2 * k - 1) * n) / (2 * l);
                    caps[idx.min(n - 1)]
                })
                .collect();
            levels.reverse();
            Ok(levels)
        }
        CodebookInit::Random { seed } => {
            let p_max = (0..band.len())
                .map(|s| {
                    let pen = lambda + mu * band.g0[s];
                    (1.0 / pen - 1.0 / band.g1[s]).clamp(0.0, 1e15)
                })
                .fold(0.0f64, f64::max)
                .max(1e-3);
            let mut key = [0u8; 32];
            key[..8].copy_from_slice(&seed.to_le_bytes());
            key[8..22].copy_from_slice(b"specshare.init");
            let mut rng = ChaCha8Rng::from_seed(key);
            let mut levels: Vec<f64> = (0..l)
                .map(|_| {
                    let u = ((rng.next_u64() >> 11) as f64 + 1.0) / (1u64 << 53) as f64;
                    u * p_max
                })
                .collect();
            levels.sort_by(|a, b| b.partial_cmp(a).unwrap());
            Ok(levels)
        }
    }
}

// ---------------------------------------------------------------------------
// boundaries and structural checks

/// Decision boundary between a larger level `p_hi` and a smaller level
/// `p_lo` as the secondary gain `g1` at which both score equally, given the
/// interference gain `g0`:
///
/// ```text
/// g1 = (e^(w d) - 1) / (p_hi - p_lo e^(w d)),   w = lambda + mu g0, d = p_hi - p_lo
/// ```
///
/// The boundary has a vertical asymptote in `g0` where the denominator
/// vanishes; querying at or beyond it is an error carrying the asymptote
/// location.
pub fn boundary_g1(p_hi: f64, p_lo: f64, lambda: f64, mu: f64, g0: f64) -> Result<f64> {
    if !(p_hi.is_finite() && p_lo.is_finite()) || p_lo < 0.0 || p_hi <= p_lo {
        return Err(Error::Config(format!(
            "boundary requires p_hi > p_lo >= 0, got p_hi={p_hi}, p_lo={p_lo}"
        )));
    }
    if g0 < 0.0 {
        return Err(Error::Config(format!("negative interference gain {g0}")));
    }
    validate_duals(lambda, mu)?;
    let d = p_hi - p_lo;
    let w = lambda + mu * g0;
    let e = (w * d).exp();
    let den = p_hi - p_lo * e;
    if den <= 0.0 {
        return Err(Error::AsymptoteExceeded {
            g0,
            asymptote: boundary_asymptote(p_hi, p_lo, lambda, mu).unwrap_or(f64::NEG_INFINITY),
        });
    }
    Ok((e - 1.0) / den)
}

/// The `g0` at which the boundary between `p_hi` and `p_lo` diverges:
/// `(ln(p_hi/p_lo)/(p_hi-p_lo) - lambda) / mu`.  `None` when no finite
/// asymptote exists (`p_lo = 0` or `mu = 0`).
pub fn boundary_asymptote(p_hi: f64, p_lo: f64, lambda: f64, mu: f64) -> Option<f64> {
    if p_lo <= 0.0 || mu == 0.0 {
        return None;
    }
    Some(((p_hi / p_lo).ln() / (p_hi - p_lo) - lambda) / mu)
}

/// Structural report for a converged codebook (see module docs).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PropertyReport {
    /// `p_1 > p_2 > ... > p_L`.
    pub strictly_descending: bool,
    /// `p_1 .. p_{L-1} > 0`.
    pub interior_positive: bool,
    /// `p_L = 0` whenever `lambda + mu E[g0] >= E[g1]`; `None` when the
    /// premise does not hold.
    pub saturated_tail_zero: Option<bool>,
    /// Adjacent decision boundaries stay above `g1 = lambda + mu g0` at
    /// every probed `g0`.
    pub boundaries_above_penalty: bool,
    /// Human-readable violations.
    pub violations: Vec<String>,
}

impl PropertyReport {
    pub fn all_ok(&self) -> bool {
        self.strictly_descending
            && self.interior_positive
            && self.saturated_tail_zero.unwrap_or(true)
            && self.boundaries_above_penalty
    }
}

/// Check the structural properties a converged codebook must satisfy.
/// `mean_g0` and `mean_g1` are the channel means (1 for the default models).
pub fn verify_codebook_properties(
    codebook: &PowerCodebook,
    lambda: f64,
    mu: f64,
    mean_g0: f64,
    mean_g1: f64,
) -> PropertyReport {
    let p = &codebook.levels;
    let l = p.len();
    let mut violations = Vec::new();

    let strictly_descending = p.windows(2).all(|w| w[0] > w[1]);
    if !strictly_descending {
        violations.push("levels are not strictly decreasing".into());
    }
    let interior_positive = p.iter().take(l.saturating_sub(1)).all(|&x| x > 0.0);
    if !interior_positive {
        violations.push("a non-final level is zero".into());
    }
    let saturated = lambda + mu * mean_g0 >= mean_g1;
    let saturated_tail_zero = if saturated {
        let ok = *p.last().unwrap_or(&0.0) == 0.0;
        if !ok {
            violations.push(format!(
                "water penalty {} exceeds mean gain {} but the last level is {}",
                lambda + mu * mean_g0,
                mean_g1,
                p.last().unwrap()
            ));
        }
        Some(ok)
    } else {
        None
    };

    let mut boundaries_above_penalty = true;
    for jw in p.windows(2) {
        let (hi, lo) = (jw[0], jw[1]);
        if hi <= lo {
            continue;
        }
        let g0_cap = boundary_asymptote(hi, lo, lambda, mu)
            .map_or(25.0 * mean_g0, |a| a.min(25.0 * mean_g0));
        if g0_cap <= 0.0 {
            continue;
        }
        for i in 0..50 {
            let g0 = g0_cap * (i as f64) / 50.0;
            if lambda + mu * g0 == 0.0 {
                // A zero water penalty puts both the boundary and the
                // penalty line exactly at g1 = 0; strict separation is
                // claimed only where the penalty is positive.
                continue;
            }
            match boundary_g1(hi, lo, lambda, mu, g0) {
                Ok(b) => {
                    if b <= lambda + mu * g0 {
                        boundaries_above_penalty = false;
                        violations.push(format!(
                            "boundary between {hi} and {lo} at g0={g0} is {b}, below the penalty line"
                        ));
                        break;
                    }
                }
                Err(_) => break,
            }
        }
    }

    PropertyReport {
        strictly_descending,
        interior_positive,
        saturated_tail_zero,
        boundaries_above_penalty,
        violations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fading::{sample_training_set, BandModels};

    fn view<'a>(g0: &'a [f64], g1: &'a [f64]) -> BandView<'a> {
        BandView::new(g0, g1)
    }

    #[test]
    fn centroid_matches_closed_form_quadratic() {
        // Two samples g1 = {1, 3}, lambda = 0.5, mu = 0:
        // 1/(1+p) + 3/(1+3p) = 1  =>  3p^2 - 2p - 3 = 0  =>  p = (1+sqrt(10))/3.
        let g0 = [0.0, 0.0];
        let g1 = [1.0, 3.0];
        let p = centroid_power(view(&g0, &g1), 0.5, 0.0).unwrap().unwrap();
        let expect = (1.0 + 10f64.sqrt()) / 3.0;
        assert!((p - expect).abs() < 1e-9, "{p} vs {expect}");
    }

    #[test]
    fn centroid_clamps_to_zero() {
        let g0 = [0.0, 0.0];
        let g1 = [1.0, 3.0];
        // E[g1] = 2 <= lambda: clamped exactly.
        let p = centroid_power(view(&g0, &g1), 2.0, 0.0).unwrap().unwrap();
        assert_eq!(p, 0.0);
    }

    #[test]
    fn centroid_empty_region_signals() {
        let p = centroid_power(view(&[], &[]), 0.5, 0.0).unwrap();
        assert!(p.is_none());
    }

    #[test]
    fn centroid_newton_agrees_with_plain_bisection() {
        use rand::{RngCore, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed_0cb1);
        let mut uni = move || (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        for case in 0..100 {
            let n = 1 + (uni() * 49.0) as usize;
            let g0: Vec<f64> = (0..n).map(|_| -uni().max(1e-12).ln()).collect();
            let g1: Vec<f64> = (0..n).map(|_| -uni().max(1e-12).ln()).collect();
            let weights: Vec<f64> = if case % 2 == 0 {
                vec![1.0; n]
            } else {
                (0..n).map(|_| uni()).collect()
            };
            let lambda = 0.01 + 2.0 * uni();
            let mu = 3.0 * uni();
            let Some(p) = weighted_centroid(&g0, &g1, &weights, lambda, mu) else {
                continue;
            };
            // Independent oracle: plain bisection on the stationarity residual,
            // written out from scratch.
            let res = |p: f64| -> f64 {
                let mut acc = 0.0;
                for i in 0..n {
                    acc += weights[i] * (g1[i] / (1.0 + g1[i] * p) - (lambda + mu * g0[i]));
                }
                acc
            };
            if res(0.0) <= 0.0 {
                assert_eq!(p, 0.0, "case {case}: clamp disagreement");
                continue;
            }
            let ub = (0..n)
                .map(|i| 1.0 / (lambda + mu * g0[i]) - 1.0 / g1[i])
                .fold(0.0f64, f64::max)
                .min(1e15);
            let r = crate::numeric::bisect(res, 0.0, ub, 1e-14, 0.0, 200);
            assert!(
                (p - r.root).abs() <= 1e-8 * r.root.abs().max(1.0),
                "case {case}: newton {p} vs bisect {}",
                r.root
            );
        }
    }

    #[test]
    fn nnc_breaks_ties_toward_lowest_index() {
        let g0 = [1.0];
        let g1 = [1.0];
        let cb = PowerCodebook { levels: vec![0.7, 0.7, 0.2] };
        let part = nnc_assign(view(&g0, &g1), &cb, 0.3, 0.0).unwrap();
        assert_eq!(part.labels, vec![0]);
    }

    #[test]
    fn two_sample_fixed_point_is_reached() {
        // Worked fixed point: g1 = {0.5, 8}, lambda = 0.1, mu = 0, L = 2.
        // Each sample ends in its own region with its water-filling power:
        // {9.875, 8}.
        let g0 = [1.0, 1.0];
        let g1 = [0.5, 8.0];
        let out = run_gla(
            view(&g0, &g1),
            2,
            0.1,
            0.0,
            &CodebookInit::Levels(vec![1.0, 0.1]),
            DEFAULT_TOL,
            DEFAULT_MAX_ITER,
        )
        .unwrap();
        let lv = &out.codebook.levels;
        assert!((lv[0] - 9.875).abs() < 1e-8, "{lv:?}");
        assert!((lv[1] - 8.0).abs() < 1e-8, "{lv:?}");
        assert_eq!(out.partition.counts, vec![1, 1]);
        assert!(out.report.converged);
    }

    #[test]
    fn gla_trace_is_monotone_and_converges() {
        let ts = sample_training_set(&[BandModels::default()], 10_000, 21).unwrap();
        let out = run_gla(
            ts.band(0),
            4,
            0.1,
            0.1,
            &CodebookInit::Quantile,
            DEFAULT_TOL,
            DEFAULT_MAX_ITER,
        )
        .unwrap();
        assert!(out.report.converged, "iterations {}", out.report.iterations);
        assert!(out.report.monotone);
        assert!(out.report.iterations < DEFAULT_MAX_ITER);
        let report = verify_codebook_properties(&out.codebook, 0.1, 0.1, 1.0, 1.0);
        assert!(report.all_ok(), "{:?}", report.violations);
    }

    #[test]
    fn properties_allow_zero_penalty_at_origin() {
        // With lambda = 0 (power budget slack) the boundary and the penalty
        // line coincide at exactly g1 = 0 when g0 = 0; only w > 0 carries a
        // strict-separation claim.
        let cb = PowerCodebook { levels: vec![60.8, 6.78, 1.27, 0.0] };
        let report = verify_codebook_properties(&cb, 0.0, 0.92, 1.0, 1.0);
        assert!(report.boundaries_above_penalty, "{:?}", report.violations);
        assert!(report.all_ok(), "{:?}", report.violations);
    }

    #[test]
    fn gla_is_deterministic() {
        let ts = sample_training_set(&[BandModels::default()], 5_000, 22).unwrap();
        let a = run_gla(ts.band(0), 4, 0.2, 0.05, &CodebookInit::Quantile, 1e-6, 500).unwrap();
        let b = run_gla(ts.band(0), 4, 0.2, 0.05, &CodebookInit::Quantile, 1e-6, 500).unwrap();
        assert_eq!(a.codebook, b.codebook);
        assert_eq!(a.partition.labels, b.partition.labels);
    }

    #[test]
    fn boundary_closed_form_and_asymptote() {
        // p_hi=2, p_lo=1, lambda=mu=0.1, g0=0: (e^0.1 - 1)/(2 - e^0.1).
        let b = boundary_g1(2.0, 1.0, 0.1, 0.1, 0.0).unwrap();
        assert!((b - 0.117532).abs() < 1e-5, "{b}");
        let asym = boundary_asymptote(2.0, 1.0, 0.1, 0.1).unwrap();
        assert!((asym - 10.0 * (2f64.ln() - 0.1)).abs() < 1e-12);
        assert!(matches!(
            boundary_g1(2.0, 1.0, 0.1, 0.1, 6.0),
            Err(Error::AsymptoteExceeded { .. })
        ));
        // p_lo = 0 never has an asymptote.
        assert!(boundary_asymptote(2.0, 0.0, 0.1, 0.1).is_none());
        assert!(boundary_g1(2.0, 0.0, 0.1, 0.1, 1e6).is_ok());
    }

    #[test]
    fn boundary_rejects_bad_pairs() {
        assert!(boundary_g1(1.0, 1.0, 0.1, 0.1, 0.0).is_err());
        assert!(boundary_g1(0.5, 1.0, 0.1, 0.1, 0.0).is_err());
        assert!(boundary_g1(2.0, -0.5, 0.1, 0.1, 0.0).is_err());
    }

    #[test]
    fn boundary_stays_above_penalty_line() {
        for &(hi, lo, lam, mu) in &[
            (2.0, 1.0, 0.1, 0.1),
            (5.0, 0.5, 0.05, 0.2),
            (1.0, 0.0, 0.3, 0.4),
            (0.8, 0.3, 0.5, 0.0),
        ] {
            let cap = boundary_asymptote(hi, lo, lam, mu).unwrap_or(20.0).min(20.0);
            for i in 0..40 {
                let g0 = cap * i as f64 / 40.0;
                if let Ok(b) = boundary_g1(hi, lo, lam, mu, g0) {
                    assert!(b > lam + mu * g0, "hi={hi} lo={lo} g0={g0}");
                }
            }
        }
    }

    #[test]
    fn saturated_duals_force_zero_tail() {
        // lambda + mu >= 1 with unit-mean channels: last level must be 0.
        let ts = sample_training_set(&[BandModels::default()], 20_000, 23).unwrap();
        let out = run_gla(
            ts.band(0),
            4,
            0.8,
            0.4,
            &CodebookInit::Quantile,
            DEFAULT_TOL,
            DEFAULT_MAX_ITER,
        )
        .unwrap();
        assert_eq!(*out.codebook.levels.last().unwrap(), 0.0, "{:?}", out.codebook.levels);
        let rep = verify_codebook_properties(&out.codebook, 0.8, 0.4, 1.0, 1.0);
        assert_eq!(rep.saturated_tail_zero, Some(true));
    }

    #[test]
    fn relabeling_by_boundaries_matches_nnc() {
        // Labels recomputed from closed-form boundaries agree with the
        // assignment step exactly.
        let ts = sample_training_set(&[BandModels::default()], 20_000, 24).unwrap();
        let band = ts.band(0);
        let (lambda, mu) = (0.15, 0.1);
        let out = run_gla(band, 4, lambda, mu, &CodebookInit::Quantile, 1e-6, 500).unwrap();
        let lv = &out.codebook.levels;
        let mut mismatches = 0;
        for s in 0..band.len() {
            let (g0, g1) = (band.g0[s], band.g1[s]);
            let mut label = (lv.len() - 1) as u32;
            for j in 0..lv.len() - 1 {
                match boundary_g1(lv[j], lv[j + 1], lambda, mu, g0) {
                    Ok(b) => {
                        if g1 >= b {
                            label = j as u32;
                            break;
                        }
                    }
                    Err(_) => continue, // beyond asymptote: g1 can't reach level j
                }
            }
            if label != out.partition.labels[s] {
                mismatches += 1;
            }
        }
        assert_eq!(mismatches, 0);
    }

    #[test]
    fn random_init_is_seed_deterministic() {
        let ts = sample_training_set(&[BandModels::default()], 2_000, 30).unwrap();
        let a = initial_levels(ts.band(0), 4, 0.1, 0.1, &CodebookInit::Random { seed: 5 }).unwrap();
        let b = initial_levels(ts.band(0), 4, 0.1, 0.1, &CodebookInit::Random { seed: 5 }).unwrap();
        let c = initial_levels(ts.band(0), 4, 0.1, 0.1, &CodebookInit::Random { seed: 6 }).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn rejects_undefined_water_level() {
        let g0 = [1.0];
        let g1 = [1.0];
        assert!(matches!(
            run_gla(view(&g0, &g1), 2, 0.0, 0.0, &CodebookInit::Quantile, 1e-6, 10),
            Err(Error::UndefinedWaterLevel)
        ));
    }
}
