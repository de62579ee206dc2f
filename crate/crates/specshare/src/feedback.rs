//! Codebook design when the feedback index crosses a noisy channel.
//!
//! The receiver quantizes its channel observation to a `B`-bit index, but
//! each bit flips independently with crossover probability `q_f` before the
//! transmitter reads it.  The transmitter therefore sends level `k` with
//! probability `rho[k][j]` when region `j` was fed back, and everything —
//! the assignment rule, the level update, the achieved capacity, and the
//! feasibility accounting — must average over that confusion.
//!
//! The design loop is the same alternation as [`crate::lloyd`], with two
//! changes:
//!
//! * a sample joins the region whose **expected** score
//!   `sum_k rho[k][j] * (log(1+g1 p_k) - (lambda + mu g0) p_k)` is largest,
//!   not the region whose own level scores best;
//! * level `k` is updated from **every** region, each sample weighted by
//!   the probability `rho[k][label]` that its feedback makes the
//!   transmitter use level `k`.
//!
//! With `q_f = 0` the matrix is the identity and the pipeline reproduces
//! the noise-free design bit for bit.
//!
//! Codebook positions are binary codewords here: position `k` is the `B`-bit
//! word `k` on the index channel, and the error matrix couples positions by
//! the Hamming distance of their words.  Levels start in descending order
//! (so nearby powers get nearby codewords) and are reported in converged
//! order, *not* re-sorted — permuting positions changes the design.
//! [`exhaustive_index_search`] scores every position permutation of a
//! finished codebook and returns the best one.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dual::{self, QuantizedSolution, SolverOptions};
use crate::error::{Error, Result};
use crate::fading::{BandModels, BandView, TrainingSet};
use crate::full_csi::ConstraintSet;
use crate::lloyd::{self, CodebookInit, GlaOutcome, Partition, PowerCodebook};
use crate::numeric::pairwise_sum;

/// Largest supported index width for building a transition matrix; the
/// matrix has `4^bits` entries, so wider indices are rejected up front
/// rather than exhausting memory.
pub const MAX_BITS: u32 = 12;

/// Widest index for which [`exhaustive_index_search`] will enumerate all
/// `L!` permutations.
pub const MAX_SEARCH_BITS: u32 = 3;

/// A `B`-bit feedback index channel: `B` independent uses of a binary
/// symmetric channel with per-bit crossover probability `q_f`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FeedbackChannel {
    bits: u32,
    q_f: f64,
    rho: Vec<Vec<f64>>,
}

impl FeedbackChannel {
    /// Index width in bits.
    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// Per-bit crossover probability.
    pub fn crossover(&self) -> f64 {
        self.q_f
    }

    /// Codebook size `L = 2^bits` this channel carries.
    pub fn levels(&self) -> usize {
        1usize << self.bits
    }

    /// Transition matrix: `rho[k][j]` is the probability that fed-back
    /// index `j` is decoded as `k`.
    pub fn rho(&self) -> &[Vec<f64>] {
        &self.rho
    }
}

/// Build the `L x L` transition matrix for a `bits`-wide index with per-bit
/// crossover `q_f`.
///
/// `rho[k][j] = q_f^d * (1-q_f)^(bits-d)` where `d` is the Hamming distance
/// between the binary words `k` and `j`.  The matrix is symmetric and
/// doubly stochastic; `q_f = 0` gives the identity and `q_f = 0.5` the
/// uniform matrix.
pub fn transition_matrix(bits: u32, q_f: f64) -> Result<FeedbackChannel> {
    if bits == 0 {
        return Err(Error::Config("feedback index needs at least one bit".into()));
    }
    if bits > MAX_BITS {
        return Err(Error::Config(format!(
            "feedback index wider than {MAX_BITS} bits is not supported (the \
             transition matrix has 4^bits entries)"
        )));
    }
    if !(0.0..=0.5).contains(&q_f) {
        return Err(Error::Config(format!(
            "crossover probability must lie in [0, 0.5], got {q_f}"
        )));
    }
    let l = 1usize << bits;
    // Entry value depends only on the Hamming distance; tabulate the
    // bits+1 possible values once.
    let by_distance: Vec<f64> =
        (0..=bits).map(|d| q_f.powi(d as i32) * (1.0 - q_f).powi((bits - d) as i32)).collect();
    let rho: Vec<Vec<f64>> = (0..l)
        .map(|k| (0..l).map(|j| by_distance[(k ^ j).count_ones() as usize]).collect())
        .collect();
    Ok(FeedbackChannel { bits, q_f, rho })
}

fn check_channel(channel: &FeedbackChannel, l: usize) -> Result<()> {
    if channel.levels() != l {
        return Err(Error::DimensionMismatch(format!(
            "{}-bit channel carries {} indices but the codebook has {} levels",
            channel.bits,
            channel.levels(),
            l
        )));
    }
    Ok(())
}

/// Assign every sample to the region with the best expected score over the
/// decoded index: `argmax_j sum_k rho[k][j] score(k)`, ties resolved toward
/// the lowest index.
pub fn gla2_assign(
    band: BandView<'_>,
    codebook: &PowerCodebook,
    channel: &FeedbackChannel,
    lambda: f64,
    mu: f64,
) -> Result<Partition> {
    lloyd::validate_duals(lambda, mu)?;
    check_channel(channel, codebook.len())?;
    if band.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let labels = lloyd::assign_labels(band, &codebook.levels, lambda, mu, Some(&channel.rho));
    Ok(lloyd::partition_from_labels(labels, codebook.len()))
}

/// Updated power for codebook position `k` given a fixed partition: the
/// root of `sum_s w_s [ g1/(1+g1 p) - (lambda + mu g0) ] = 0` with weights
/// `w_s = rho[k][label_s]`, clamped at zero.
///
/// Returns `Ok(None)` when every weight is zero (an unreachable position
/// whose level carries no information and stays frozen); with `q_f > 0`
/// all weights are positive, so this only happens at `q_f = 0` with an
/// empty region `k`.
pub fn gla2_centroid(
    band: BandView<'_>,
    partition: &Partition,
    channel: &FeedbackChannel,
    k: usize,
    lambda: f64,
    mu: f64,
) -> Result<Option<f64>> {
    lloyd::validate_duals(lambda, mu)?;
    let l = channel.levels();
    if k >= l {
        return Err(Error::Config(format!("position {k} out of range for {l} levels")));
    }
    if partition.labels.len() != band.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {} samples",
            partition.labels.len(),
            band.len()
        )));
    }
    if let Some(&bad) = partition.labels.iter().find(|&&lab| lab as usize >= l) {
        return Err(Error::DimensionMismatch(format!(
            "label {bad} out of range for {l} levels"
        )));
    }
    let weights: Vec<f64> =
        partition.labels.iter().map(|&lab| channel.rho[k][lab as usize]).collect();
    Ok(lloyd::weighted_centroid(band.g0, band.g1, &weights, lambda, mu))
}

/// Design a codebook for one band at fixed duals, accounting for feedback
/// index errors.
///
/// Same alternation and stopping rule as [`lloyd::run_gla`], with the
/// expected-score assignment and confusion-weighted level updates described
/// in the module docs.  The objective trace is the error-aware design
/// objective and is monotone non-decreasing.  Unlike the noise-free run the
/// converged levels are **not** re-sorted: position `k` is the codeword `k`
/// on the index channel.
pub fn run_gla2(
    band: BandView<'_>,
    l: usize,
    channel: &FeedbackChannel,
    lambda: f64,
    mu: f64,
    init: &CodebookInit,
    tol: f64,
    max_iter: usize,
) -> Result<GlaOutcome> {
    lloyd::validate_duals(lambda, mu)?;
    check_channel(channel, l)?;
    if band.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let levels = lloyd::initial_levels(band, l, lambda, mu, init)?;
    let out = lloyd::engine_run(band, levels, lambda, mu, Some(&channel.rho), tol, max_iter);
    Ok(GlaOutcome {
        codebook: PowerCodebook { levels: out.levels },
        partition: lloyd::partition_from_labels(out.labels, l),
        report: out.report,
    })
}

/// Design feasible codebooks for every band under feedback index errors.
///
/// Wraps the same multiplier search as [`dual::solve_quantized`], with the
/// error matrix folded into the per-band designs and into the achieved
/// power/interference averages, so feasibility accounts for mis-decoded
/// indices.  Requires the trained design method; the reported codebooks
/// keep converged position order (see [`run_gla2`]).
pub fn solve_noisy(
    training: &TrainingSet,
    models: &[BandModels],
    constraints: &ConstraintSet,
    channel: &FeedbackChannel,
    opts: &SolverOptions,
) -> Result<QuantizedSolution> {
    check_channel(channel, opts.levels)?;
    dual::solve_quantized_with_errors(training, models, constraints, opts, Some(&channel.rho))
}

/// Result of [`exhaustive_index_search`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IndexSearchOutcome {
    /// Best level-to-codeword map: codeword `k` should carry level
    /// `levels[permutation[k]]` of the input codebook.
    pub permutation: Vec<usize>,
    /// Error-aware design objective of the best permutation (after
    /// re-partitioning the training set for it).
    pub objective: f64,
    /// Objective of the codebook as given (identity permutation), for
    /// comparison.
    pub identity_objective: f64,
}

/// Score every assignment of codebook levels to binary codewords and return
/// the best.
///
/// Each of the `L!` permutations is evaluated as a fresh codebook: samples
/// are re-assigned by the expected-score rule and the error-aware design
/// objective is averaged over the training set.  Exact ties go to the
/// lexicographically smallest permutation, so a noise-free channel returns
/// the identity.  Only widths up to [`MAX_SEARCH_BITS`] are accepted
/// (`L! = 40320` candidates at three bits); larger widths need the
/// suboptimal assignment heuristics this crate does not implement.
pub fn exhaustive_index_search(
    band: BandView<'_>,
    codebook: &PowerCodebook,
    channel: &FeedbackChannel,
    lambda: f64,
    mu: f64,
) -> Result<IndexSearchOutcome> {
    lloyd::validate_duals(lambda, mu)?;
    check_channel(channel, codebook.len())?;
    if band.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if channel.bits > MAX_SEARCH_BITS {
        return Err(Error::Unsupported(format!(
            "exhaustive index search enumerates L! permutations; {} bits \
             (L = {}) exceeds the supported {MAX_SEARCH_BITS}",
            channel.bits,
            channel.levels()
        )));
    }
    let l = codebook.len();
    let n = band.len();
    // Base per-sample scores of each level; a permutation only permutes
    // which column feeds which codeword.
    let base: Vec<f64> = (0..n)
        .flat_map(|s| {
            let w = lambda + mu * band.g0[s];
            let g1 = band.g1[s];
            codebook.levels.iter().map(move |&p| lloyd::score(g1, w, p))
        })
        .collect();
    let perms = permutations_lex(l);
    let scored: Vec<f64> = perms
        .par_iter()
        .map(|perm| {
            // Objective under optimal re-assignment: every sample picks the
            // codeword maximizing its expected score, so the per-sample
            // contribution is the max over codewords.
            let terms: Vec<f64> = (0..n)
                .map(|s| {
                    let row = &base[s * l..(s + 1) * l];
                    let mut best = f64::NEG_INFINITY;
                    for j in 0..l {
                        let mut v = 0.0;
                        for (k, &src) in perm.iter().enumerate() {
                            v += channel.rho[k][j] * row[src];
                        }
                        if v > best {
                            best = v;
                        }
                    }
                    best
                })
                .collect();
            pairwise_sum(&terms) / n as f64
        })
        .collect();
    let mut best_idx = 0;
    for (i, &v) in scored.iter().enumerate() {
        if v > scored[best_idx] {
            best_idx = i;
        }
    }
    Ok(IndexSearchOutcome {
        permutation: perms[best_idx].clone(),
        objective: scored[best_idx],
        // perms[0] is the identity (lexicographic order).
        identity_objective: scored[0],
    })
}

/// All permutations of `0..l` in lexicographic order.
fn permutations_lex(l: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(l);
    let mut used = vec![false; l];
    fn rec(l: usize, current: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if current.len() == l {
            out.push(current.clone());
            return;
        }
        for i in 0..l {
            if !used[i] {
                used[i] = true;
                current.push(i);
                rec(l, current, used, out);
                current.pop();
                used[i] = false;
            }
        }
    }
    rec(l, &mut current, &mut used, &mut out);
    out
}
