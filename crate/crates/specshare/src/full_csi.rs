//! Benchmark allocator with perfect channel knowledge.
//!
//! With both gains observable per transmission, the capacity-maximizing
//! power under an average transmit-power budget `P_avg` (across bands) and
//! per-band average interference caps `Q_i` is a modified water-filling:
//!
//! ```text
//! p_i(g0, g1) = ( 1 / (lambda + mu_i g0)  -  1 / g1 )+
//! ```
//!
//! `lambda` prices transmit power, `mu_i` prices interference into band
//! `i`'s primary receiver, and at most the binding constraints carry
//! positive prices.  The solver mirrors that structure: first assume the
//! power budget is slack (`lambda = 0`) and price interference alone; if
//! the resulting power spend exceeds the budget, search `lambda > 0` where
//! each band either needs no interference price or has its cap met with
//! equality.

use serde::{Deserialize, Serialize};

use crate::fading::{BandView, TrainingSet};
use crate::numeric::{mean, pairwise_sum};
use crate::{Error, Result};

/// Relative feasibility tolerance on constraint equalities.
pub const TOL_FEAS: f64 = 1e-4;
/// Complementary-slackness tolerance used by audits.
pub const TOL_CS: f64 = 1e-3;
/// Initial multiplier bracket, expanded geometrically when needed.
pub const BRACKET: (f64, f64) = (1e-8, 1e4);

/// Long-term constraint set: one power budget, one interference cap per
/// band (`None` means that band's primary receiver is not protected).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSet {
    /// Average transmit-power budget, averaged over bands (linear scale).
    pub p_avg: f64,
    /// Per-band average interference caps (linear scale).
    pub q_avg: Vec<Option<f64>>,
}

impl ConstraintSet {
    pub fn new(p_avg: f64, q_avg: Vec<Option<f64>>) -> Self {
        ConstraintSet { p_avg, q_avg }
    }

    /// Single-band constraints.
    pub fn narrowband(p_avg: f64, q_avg: Option<f64>) -> Self {
        ConstraintSet { p_avg, q_avg: vec![q_avg] }
    }

    pub fn m(&self) -> usize {
        self.q_avg.len()
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        if !(self.p_avg.is_finite() && self.p_avg > 0.0) {
            return Err(Error::Config(format!(
                "power budget must be positive and finite, got {}",
                self.p_avg
            )));
        }
        if self.q_avg.len() != m {
            return Err(Error::DimensionMismatch(format!(
                "{} interference caps for {} bands",
                self.q_avg.len(),
                m
            )));
        }
        for q in self.q_avg.iter().flatten() {
            if !(q.is_finite() && *q > 0.0) {
                return Err(Error::Config(format!(
                    "interference caps must be positive and finite, got {q}"
                )));
            }
        }
        Ok(())
    }
}

/// Prices attached to the constraints: `lambda` for the power budget,
/// `mu[i]` for band `i`'s interference cap.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualVariables {
    pub lambda: f64,
    pub mu: Vec<f64>,
}

impl DualVariables {
    pub fn narrowband(lambda: f64, mu: f64) -> Self {
        DualVariables { lambda, mu: vec![mu] }
    }

    /// Water penalty `lambda + mu_i * g0` for band `i` at gain `g0`.
    pub fn penalty(&self, band: usize, g0: f64) -> f64 {
        self.lambda + self.mu[band] * g0
    }
}

/// Converged benchmark allocation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FullCsiSolution {
    pub duals: DualVariables,
    /// Per-band, per-sample transmit powers.
    pub powers: Vec<Vec<f64>>,
    /// Ergodic capacity in nats per channel use, averaged over bands.
    pub capacity: f64,
    /// Achieved average transmit power (band average).
    pub atp: f64,
    /// Achieved average interference per band.
    pub aip: Vec<f64>,
    /// Whether the power budget is met with equality (`lambda > 0`).
    pub atp_active: bool,
    /// Whether each band's cap is met with equality (`mu_i > 0`).
    pub aip_active: Vec<bool>,
}

/// Water-filling power for one sample: `(1/(lambda + mu g0) - 1/g1)+`.
///
/// Requires at least one positive multiplier; with both zero the water
/// level is undefined.  A zero `g1` yields zero power; a zero penalty for
/// this sample (e.g. `lambda = 0`, `g0 = 0`) yields the supremum `+inf`,
/// which feasibility tests treat as an over-spend.
pub fn power_point(g0: f64, g1: f64, lambda: f64, mu: f64) -> Result<f64> {
    if g0 < 0.0 || g1 < 0.0 {
        return Err(Error::Config(format!("negative gain: g0={g0}, g1={g1}")));
    }
    if lambda < 0.0 || mu < 0.0 {
        return Err(Error::Config(format!(
            "negative multiplier: lambda={lambda}, mu={mu}"
        )));
    }
    if lambda == 0.0 && mu == 0.0 {
        return Err(Error::UndefinedWaterLevel);
    }
    Ok(power_point_unchecked(g0, g1, lambda, mu))
}

#[inline]
pub(crate) fn power_point_unchecked(g0: f64, g1: f64, lambda: f64, mu: f64) -> f64 {
    let w = lambda + mu * g0;
    let p = 1.0 / w - 1.0 / g1;
    if p > 0.0 {
        p
    } else {
        0.0
    }
}

/// Fill a band's per-sample powers at the given duals.
fn band_powers(band: BandView<'_>, lambda: f64, mu: f64) -> Vec<f64> {
    band.g0
        .iter()
        .zip(band.g1)
        .map(|(&g0, &g1)| power_point_unchecked(g0, g1, lambda, mu))
        .collect()
}

fn band_atp(band: BandView<'_>, lambda: f64, mu: f64) -> f64 {
    mean(&band_powers(band, lambda, mu))
}

fn band_aip(band: BandView<'_>, lambda: f64, mu: f64) -> f64 {
    let v: Vec<f64> = band
        .g0
        .iter()
        .zip(band.g1)
        .map(|(&g0, &g1)| g0 * power_point_unchecked(g0, g1, lambda, mu))
        .collect();
    mean(&v)
}

/// Geometric bracket expansion + bisection for a decreasing function of the
/// multiplier, targeting `f(x) = target`.
fn solve_decreasing<F: FnMut(f64) -> f64>(
    mut f: F,
    target: f64,
    what: &'static str,
    hint: Option<f64>,
) -> Result<f64> {
    let (mut lo, mut hi) = match hint {
        Some(h) if h.is_finite() && h > 0.0 => (h / 16.0, h * 16.0),
        _ => BRACKET,
    };
    let mut expand = 0;
    while f(lo) < target {
        lo /= 16.0;
        expand += 1;
        if expand > 60 {
            return Err(Error::BracketFailure { what, lo, hi });
        }
    }
    expand = 0;
    while f(hi) > target {
        hi *= 16.0;
        expand += 1;
        if expand > 60 {
            return Err(Error::BracketFailure { what, lo, hi });
        }
    }
    // Bisect in log space: multipliers span many decades.
    let mut root = (lo * hi).sqrt();
    for _ in 0..200 {
        root = (lo * hi).sqrt();
        let v = f(root);
        if (v - target).abs() <= TOL_FEAS * target.abs().max(1.0) {
            break;
        }
        if v > target {
            lo = root;
        } else {
            hi = root;
        }
        if hi / lo < 1.0 + 1e-12 {
            break;
        }
    }
    Ok(root)
}

/// Find `mu_i > 0` with the band's average interference equal to `q`
/// at fixed `lambda` (the interference cap met with equality).
pub fn solve_interference_multiplier(
    band: BandView<'_>,
    lambda: f64,
    q: f64,
    hint: Option<f64>,
) -> Result<f64> {
    if band.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if !(q.is_finite() && q > 0.0) {
        return Err(Error::Config(format!("interference cap must be positive, got {q}")));
    }
    solve_decreasing(|mu| band_aip(band, lambda, mu), q, "interference multiplier", hint)
}

/// Solve the benchmark allocation for a training set and constraints.
///
/// Decision tree: if every band is capped, try `lambda = 0` with all caps
/// met by equality and accept when the power budget holds; otherwise search
/// `lambda > 0` on the budget equality, where each band keeps `mu_i = 0`
/// while its cap is slack and otherwise prices it to equality.
pub fn allocate_full_csi(training: &TrainingSet, constraints: &ConstraintSet) -> Result<FullCsiSolution> {
    let m = training.m();
    constraints.validate(m)?;
    if training.n() == 0 {
        return Err(Error::EmptyTrainingSet);
    }
    let p_avg = constraints.p_avg;

    // lambda = 0 requires every band capped (otherwise that band's power is
    // unbounded).
    if constraints.q_avg.iter().all(Option::is_some) {
        let mut mu = Vec::with_capacity(m);
        for i in 0..m {
            let q = constraints.q_avg[i].unwrap();
            mu.push(solve_interference_multiplier(training.band(i), 0.0, q, None)?);
        }
        let atp: f64 = (0..m)
            .map(|i| band_atp(training.band(i), 0.0, mu[i]))
            .sum::<f64>()
            / m as f64;
        if atp <= p_avg * (1.0 + TOL_FEAS) {
            return Ok(finish(training, DualVariables { lambda: 0.0, mu }));
        }
    }

    // lambda > 0: budget met with equality.
    let mut mu_hints: Vec<Option<f64>> = vec![None; m];
    let mu_at = |lambda: f64, hints: &mut Vec<Option<f64>>| -> Result<Vec<f64>> {
        let mut mu = Vec::with_capacity(m);
        for i in 0..m {
            let band = training.band(i);
            let mu_i = match constraints.q_avg[i] {
                None => 0.0,
                Some(q) => {
                    if band_aip(band, lambda, 0.0) <= q {
                        0.0
                    } else {
                        let v = solve_interference_multiplier(band, lambda, q, hints[i])?;
                        hints[i] = Some(v);
                        v
                    }
                }
            };
            mu.push(mu_i);
        }
        Ok(mu)
    };

    let atp_of = |lambda: f64, mu: &[f64]| -> f64 {
        (0..m)
            .map(|i| band_atp(training.band(i), lambda, mu[i]))
            .sum::<f64>()
            / m as f64
    };

    let (mut lo, mut hi) = BRACKET;
    let mut expand = 0;
    loop {
        let mu = mu_at(lo, &mut mu_hints)?;
        if atp_of(lo, &mu) > p_avg {
            break;
        }
        lo /= 16.0;
        expand += 1;
        if expand > 60 {
            return Err(Error::BracketFailure { what: "power multiplier", lo, hi });
        }
    }
    expand = 0;
    loop {
        let mu = mu_at(hi, &mut mu_hints)?;
        if atp_of(hi, &mu) < p_avg {
            break;
        }
        hi *= 16.0;
        expand += 1;
        if expand > 60 {
            return Err(Error::BracketFailure { what: "power multiplier", lo, hi });
        }
    }
    let mut lambda = (lo * hi).sqrt();
    let mut mu = mu_at(lambda, &mut mu_hints)?;
    for _ in 0..200 {
        lambda = (lo * hi).sqrt();
        mu = mu_at(lambda, &mut mu_hints)?;
        let atp = atp_of(lambda, &mu);
        if (atp - p_avg).abs() <= TOL_FEAS * p_avg.max(1.0) {
            break;
        }
        if atp > p_avg {
            lo = lambda;
        } else {
            hi = lambda;
        }
        if hi / lo < 1.0 + 1e-12 {
            break;
        }
    }
    Ok(finish(training, DualVariables { lambda, mu }))
}

fn finish(training: &TrainingSet, duals: DualVariables) -> FullCsiSolution {
    let m = training.m();
    let mut powers = Vec::with_capacity(m);
    let mut aip = Vec::with_capacity(m);
    let mut cap_terms = Vec::with_capacity(m);
    let mut atp_terms = Vec::with_capacity(m);
    for i in 0..m {
        let band = training.band(i);
        let p = band_powers(band, duals.lambda, duals.mu[i]);
        let interf: Vec<f64> = band.g0.iter().zip(&p).map(|(&g0, &pi)| g0 * pi).collect();
        let caps: Vec<f64> = band.g1.iter().zip(&p).map(|(&g1, &pi)| (g1 * pi).ln_1p()).collect();
        aip.push(mean(&interf));
        cap_terms.push(pairwise_sum(&caps) / band.len() as f64);
        atp_terms.push(mean(&p));
        powers.push(p);
    }
    let capacity = pairwise_sum(&cap_terms) / m as f64;
    let atp = pairwise_sum(&atp_terms) / m as f64;
    let aip_active = duals.mu.iter().map(|&mu| mu > 0.0).collect();
    FullCsiSolution {
        atp_active: duals.lambda > 0.0,
        aip_active,
        duals,
        powers,
        capacity,
        atp,
        aip,
    }
}
