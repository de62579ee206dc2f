//! Monte-Carlo evaluation of designed codebooks.
//!
//! All estimates are sample means over a band's training (or evaluation)
//! set, accumulated with pairwise summation so results do not depend on
//! thread count or accumulation order.  Capacities are in nats per channel
//! use.  The feedback-error-aware variants marginalize over the index error
//! analytically: with `rho[k][j]` the probability that transmitted index `j`
//! arrives as `k`, a sample assigned to region `j` transmits level `k` with
//! probability `rho[k][j]`, so its expected rate and spend are
//! `sum_k rho[k][j] f(p_k)` — no extra randomness is simulated.

use crate::fading::BandView;
use crate::lloyd::{Partition, PowerCodebook};
use crate::numeric::pairwise_sum;
use crate::{Error, Result};

fn check_shapes(
    band: BandView<'_>,
    partition: &Partition,
    codebook: &PowerCodebook,
) -> Result<()> {
    if band.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if partition.labels.len() != band.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {} samples",
            partition.labels.len(),
            band.len()
        )));
    }
    if partition.counts.len() != codebook.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} regions for {} levels",
            partition.counts.len(),
            codebook.len()
        )));
    }
    if let Some(bad) = partition.labels.iter().find(|&&l| l as usize >= codebook.len()) {
        return Err(Error::DimensionMismatch(format!(
            "label {bad} out of range for {} levels",
            codebook.len()
        )));
    }
    Ok(())
}

/// Ergodic-capacity estimate `mean_s ln(1 + g1 p_label(s))`.
pub fn estimate_capacity(
    band: BandView<'_>,
    partition: &Partition,
    codebook: &PowerCodebook,
) -> Result<f64> {
    check_shapes(band, partition, codebook)?;
    let terms: Vec<f64> = (0..band.len())
        .map(|s| (band.g1[s] * codebook.levels[partition.labels[s] as usize]).ln_1p())
        .collect();
    Ok(pairwise_sum(&terms) / band.len() as f64)
}

/// Standard error of the capacity estimate (sample standard deviation over
/// the square root of the sample count).
pub fn capacity_standard_error(
    band: BandView<'_>,
    partition: &Partition,
    codebook: &PowerCodebook,
) -> Result<f64> {
    check_shapes(band, partition, codebook)?;
    let n = band.len();
    let terms: Vec<f64> = (0..n)
        .map(|s| (band.g1[s] * codebook.levels[partition.labels[s] as usize]).ln_1p())
        .collect();
    let mean = pairwise_sum(&terms) / n as f64;
    if n < 2 {
        return Ok(f64::NAN);
    }
    let sq: Vec<f64> = terms.iter().map(|t| (t - mean) * (t - mean)).collect();
    let var = pairwise_sum(&sq) / (n - 1) as f64;
    Ok((var / n as f64).sqrt())
}

/// Achieved constraint usage: `(mean p, mean g0 p)` — the band's average
/// transmit power and average interference at the primary receiver.
pub fn estimate_constraints(
    band: BandView<'_>,
    partition: &Partition,
    codebook: &PowerCodebook,
) -> Result<(f64, f64)> {
    check_shapes(band, partition, codebook)?;
    let n = band.len();
    let p: Vec<f64> = (0..n)
        .map(|s| codebook.levels[partition.labels[s] as usize])
        .collect();
    let gp: Vec<f64> = (0..n).map(|s| band.g0[s] * p[s]).collect();
    Ok((pairwise_sum(&p) / n as f64, pairwise_sum(&gp) / n as f64))
}

/// Capacity estimate when the fed-back index can arrive corrupted.
pub fn estimate_capacity_with_errors(
    band: BandView<'_>,
    partition: &Partition,
    codebook: &PowerCodebook,
    rho: &[Vec<f64>],
) -> Result<f64> {
    check_shapes(band, partition, codebook)?;
    check_rho(rho, codebook.len())?;
    let terms: Vec<f64> = (0..band.len())
        .map(|s| {
            let j = partition.labels[s] as usize;
            codebook
                .levels
                .iter()
                .enumerate()
                .map(|(k, &p)| rho[k][j] * (band.g1[s] * p).ln_1p())
                .sum()
        })
        .collect();
    Ok(pairwise_sum(&terms) / band.len() as f64)
}

/// Constraint usage when the fed-back index can arrive corrupted.
pub fn estimate_constraints_with_errors(
    band: BandView<'_>,
    partition: &Partition,
    codebook: &PowerCodebook,
    rho: &[Vec<f64>],
) -> Result<(f64, f64)> {
    check_shapes(band, partition, codebook)?;
    check_rho(rho, codebook.len())?;
    let n = band.len();
    // Expected transmitted level per region is fixed; precompute it.
    let l = codebook.len();
    let mut p_bar = vec![0.0; l];
    for j in 0..l {
        for k in 0..l {
            p_bar[j] += rho[k][j] * codebook.levels[k];
        }
    }
    let p: Vec<f64> = (0..n).map(|s| p_bar[partition.labels[s] as usize]).collect();
    let gp: Vec<f64> = (0..n).map(|s| band.g0[s] * p[s]).collect();
    Ok((pairwise_sum(&p) / n as f64, pairwise_sum(&gp) / n as f64))
}

fn check_rho(rho: &[Vec<f64>], l: usize) -> Result<()> {
    if rho.len() != l || rho.iter().any(|row| row.len() != l) {
        return Err(Error::DimensionMismatch(format!(
            "transition matrix must be {l} x {l}"
        )));
    }
    Ok(())
}

/// Relative capacity loss of `c` against a reference `c_ref`, in percent.
pub fn capacity_loss_pct(c_ref: f64, c: f64) -> Result<f64> {
    if !(c_ref.is_finite() && c_ref > 0.0) {
        return Err(Error::ZeroReference);
    }
    Ok(100.0 * (c_ref - c) / c_ref)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fading::BandView;

    fn tiny() -> (Vec<f64>, Vec<f64>, Partition, PowerCodebook) {
        let g0 = vec![1.0, 2.0, 0.5];
        let g1 = vec![1.0, 4.0, 2.0];
        let partition = Partition { labels: vec![1, 0, 0], counts: vec![2, 1] };
        let codebook = PowerCodebook { levels: vec![2.0, 0.5] };
        (g0, g1, partition, codebook)
    }

    #[test]
    fn capacity_and_constraints_by_hand() {
        let (g0, g1, part, cb) = tiny();
        let band = BandView::new(&g0, &g1);
        let c = estimate_capacity(band, &part, &cb).unwrap();
        let expect = ((1.0f64 * 0.5).ln_1p() + (4.0f64 * 2.0).ln_1p() + (2.0f64 * 2.0).ln_1p()) / 3.0;
        assert!((c - expect).abs() < 1e-15);
        let (atp, aip) = estimate_constraints(band, &part, &cb).unwrap();
        assert!((atp - (0.5 + 2.0 + 2.0) / 3.0).abs() < 1e-15);
        assert!((aip - (1.0 * 0.5 + 2.0 * 2.0 + 0.5 * 2.0) / 3.0).abs() < 1e-15);
    }

    #[test]
    fn identity_errors_match_plain_estimates() {
        let (g0, g1, part, cb) = tiny();
        let band = BandView::new(&g0, &g1);
        let rho = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let c0 = estimate_capacity(band, &part, &cb).unwrap();
        let c1 = estimate_capacity_with_errors(band, &part, &cb, &rho).unwrap();
        assert_eq!(c0, c1);
        let a0 = estimate_constraints(band, &part, &cb).unwrap();
        let a1 = estimate_constraints_with_errors(band, &part, &cb, &rho).unwrap();
        assert_eq!(a0, a1);
    }

    #[test]
    fn symmetric_errors_mix_levels() {
        let (g0, g1, part, cb) = tiny();
        let band = BandView::new(&g0, &g1);
        // Fully random feedback: every region transmits the level average.
        let rho = vec![vec![0.5, 0.5], vec![0.5, 0.5]];
        let (atp, _) = estimate_constraints_with_errors(band, &part, &cb, &rho).unwrap();
        assert!((atp - 1.25).abs() < 1e-15);
    }

    #[test]
    fn loss_pct_and_zero_reference() {
        assert!((capacity_loss_pct(2.0, 1.5).unwrap() - 25.0).abs() < 1e-12);
        assert!(matches!(capacity_loss_pct(0.0, 1.0), Err(Error::ZeroReference)));
    }

    #[test]
    fn standard_error_scales_with_n() {
        let g0 = vec![1.0; 100];
        let g1: Vec<f64> = (0..100).map(|i| 0.5 + i as f64 * 0.01).collect();
        let part = Partition { labels: vec![0; 100], counts: vec![100] };
        let cb = PowerCodebook { levels: vec![1.0] };
        let se = capacity_standard_error(BandView::new(&g0, &g1), &part, &cb).unwrap();
        assert!(se > 0.0 && se < 0.1, "{se}");
    }

    #[test]
    fn shape_mismatches_are_rejected() {
        let (g0, g1, part, _) = tiny();
        let band = BandView::new(&g0, &g1);
        let bad = PowerCodebook { levels: vec![1.0] }; // label 1 out of range
        assert!(estimate_capacity(band, &part, &bad).is_err());
    }
}
