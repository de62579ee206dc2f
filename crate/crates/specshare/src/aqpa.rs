//! Fast approximate codebook construction from the channel densities.
//!
//! Instead of training a quantizer on samples, this builder solves the
//! population stationarity conditions directly.  At duals `(lambda, mu)`
//! each region `R_j` of a converged codebook must satisfy
//!
//! ```text
//! E[ (g1/(1+g1 p_j) - lambda - mu g0) 1{R_j} ] = 0
//! ```
//!
//! where the regions are delimited by the closed-form decision boundaries.
//! With exponential gains the inner (`g0`) integral is available in closed
//! form and only a one-dimensional adaptive quadrature over `g1` remains,
//! so a codebook costs a handful of root solves instead of passes over a
//! training set.
//!
//! The ladder is built bottom-up.  The lowest level is pinned at zero and
//! the next-lowest at a small `eps` (the population seed condition admits
//! only the degenerate root at zero, so the second level is pinned just
//! above it).  Each region equation then determines the next level up, and
//! the one remaining free parameter — the first unpinned level — is chosen
//! by shooting so that the topmost region's equation balances as well.
//!
//! Construction can fail when the requested size does not fit at the given
//! duals (the tail of the gain density cannot support another distinct
//! level); this is reported as [`Error::CodebookExhausted`].

use crate::lloyd::PowerCodebook;
use crate::numeric::{integrate, integrate_with_knots};
use crate::{Error, Result};

/// Power pinned into the second-lowest level.
pub const DEFAULT_EPS_LEVEL: f64 = 1e-6;
/// Quadrature truncation of the `g1` tail, in multiples of its mean.
pub const DEFAULT_TAIL: f64 = 25.0;

/// Tunables for the analytic builder.
#[derive(Clone, Debug)]
pub struct AqpaOptions {
    /// Power assigned to the second-lowest level.
    pub eps_level: f64,
    /// Upper integration limit for `g1`, in multiples of its mean.
    pub tail: f64,
}

impl Default for AqpaOptions {
    fn default() -> Self {
        AqpaOptions { eps_level: DEFAULT_EPS_LEVEL, tail: DEFAULT_TAIL }
    }
}

/// `g1` at which powers `a > b` score equally when `g0 = 0`; infinite when
/// `a` never wins at `g0 = 0`.
fn beta(a: f64, b: f64, lambda: f64) -> f64 {
    let d = a - b;
    let e = (lambda * d).exp();
    let den = a - b * e;
    if den <= 0.0 {
        f64::INFINITY
    } else {
        (e - 1.0) / den
    }
}

/// `g0` on the boundary between powers `a > b` at secondary gain `g1`
/// (requires `mu > 0`).
fn r_curve(g1: f64, a: f64, b: f64, lambda: f64, mu: f64) -> f64 {
    (((1.0 + a * g1) / (1.0 + b * g1)).ln() / (a - b) - lambda) / mu
}

/// Channel and quadrature context for one build.
struct Ctx {
    lambda: f64,
    mu: f64,
    m0: f64,
    m1: f64,
    gmax: f64,
}

impl Ctx {
    /// Stationarity residual of the region that transmits `p_j`, bounded
    /// above by the boundary toward `p_hi` (`None` for the topmost region)
    /// and below by the boundary toward `p_lo`.  `None` when the region is
    /// structurally impossible (`p_j` never beats `p_lo` at `g0 = 0`).
    fn residual(&self, p_hi: Option<f64>, p_j: f64, p_lo: f64) -> Option<f64> {
        if self.mu == 0.0 {
            self.residual_mu0(p_hi, p_j, p_lo)
        } else {
            self.residual_mu_pos(p_hi, p_j, p_lo)
        }
    }

    fn residual_mu_pos(&self, p_hi: Option<f64>, p_j: f64, p_lo: f64) -> Option<f64> {
        let (lambda, mu, m0, m1) = (self.lambda, self.mu, self.m0, self.m1);
        let c_j = beta(p_j, p_lo, lambda);
        if !c_j.is_finite() {
            return None;
        }
        let lo = c_j.max(0.0);
        if lo >= self.gmax {
            return Some(0.0);
        }
        let outer = |g1: f64| -> f64 {
            // Region in g0: between the curve toward p_hi (above the region)
            // and the curve toward p_lo (below).
            let b = r_curve(g1, p_j, p_lo, lambda, mu);
            if b <= 0.0 {
                return 0.0;
            }
            let a = match p_hi {
                None => 0.0,
                Some(x) if !x.is_finite() => 0.0,
                Some(x) => r_curve(g1, x, p_j, lambda, mu).max(0.0),
            };
            if a >= b {
                return 0.0;
            }
            // Closed-form inner integral over g0 ~ Exp(m0) of
            // (g1/(1+g1 p_j) - lambda - mu g0) on [a, b].
            let big_a = g1 / (1.0 + g1 * p_j) - lambda;
            let ea = (-a / m0).exp();
            let eb = (-b / m0).exp();
            let val = big_a * (ea - eb) - mu * ((a + m0) * ea - (b + m0) * eb);
            val * (-g1 / m1).exp() / m1
        };
        // The integrand has a kink where the upper curve crosses zero.
        let mut knots = [0.0; 1];
        let mut nk = 0;
        if let Some(x) = p_hi {
            if x.is_finite() {
                let kink = beta(x, p_j, lambda);
                if kink.is_finite() && kink > lo && kink < self.gmax {
                    knots[0] = kink;
                    nk = 1;
                }
            }
        }
        Some(integrate_with_knots(&outer, lo, self.gmax, &knots[..nk], 1e-10, 1e-7))
    }

    fn residual_mu0(&self, p_hi: Option<f64>, p_j: f64, p_lo: f64) -> Option<f64> {
        let (lambda, m1) = (self.lambda, self.m1);
        let c_j = beta(p_j, p_lo, lambda);
        let c_hi = match p_hi {
            None => self.gmax,
            Some(x) if !x.is_finite() => self.gmax,
            Some(x) => beta(x, p_j, lambda).min(self.gmax),
        };
        if !c_j.is_finite() {
            return None;
        }
        if c_j >= c_hi {
            // Upper boundary below the lower one: the candidate upper level
            // is too close.  A strongly negative residual steers the root
            // search outward; an exactly empty tail region contributes zero.
            return Some(if c_j >= self.gmax { 0.0 } else { -1e9 });
        }
        let f = |g1: f64| (g1 / (1.0 + g1 * p_j) - lambda) * (-g1 / m1).exp() / m1;
        Some(integrate(&f, c_j, c_hi, 1e-11, 1e-8))
    }

    /// Solve region `j`'s stationarity for the next level above `p_j`.
    /// The residual is increasing in the unknown upper level; `None` when
    /// no root exists (the ladder is exhausted at this height).
    fn solve_next(&self, p_j: f64, p_lo: f64) -> Option<f64> {
        let res = |x: f64| self.residual(Some(x), p_j, p_lo);
        let mut lo = p_j * (1.0 + 1e-9) + 1e-12;
        let mut hi = (p_j * 2.0).max(1e-3);
        let mut r_hi = res(hi);
        let mut tries = 0;
        while let Some(r) = r_hi {
            if r >= 0.0 || tries >= 200 {
                break;
            }
            hi = p_j + (hi - p_j) * 2.0;
            r_hi = res(hi);
            tries += 1;
            if self.mu == 0.0 && !beta(hi, p_j, self.lambda).is_finite() {
                // Past the boundary asymptote the residual has reached its
                // supremum; if it is still negative no root exists.
                match r_hi {
                    Some(r) if r >= 0.0 => break,
                    _ => return None,
                }
            }
        }
        match r_hi {
            None => return None,
            Some(r) if r < 0.0 => return None,
            _ => {}
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            match res(mid) {
                Some(r) if r.is_finite() => {
                    if r < 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                _ => {
                    hi = mid;
                    continue;
                }
            }
            if hi - lo < 1e-9 * hi.max(1.0) {
                break;
            }
        }
        Some(0.5 * (lo + hi))
    }

    /// Residual of the topmost region (no boundary above).
    fn top_residual(&self, p1: f64, p2: f64) -> Option<f64> {
        self.residual(None, p1, p2)
    }

    /// Ladder from the bottom: `[0, eps, seed, ...]`, descending on return.
    /// `Err(built)` reports how many levels fit before exhaustion.
    fn build_ladder(&self, seed: f64, l: usize, eps: f64) -> std::result::Result<Vec<f64>, usize> {
        let mut lv = vec![0.0, eps, seed];
        for _ in 0..l - 3 {
            let last = lv[lv.len() - 1];
            let prev = lv[lv.len() - 2];
            match self.solve_next(last, prev) {
                Some(x) => lv.push(x),
                None => return Err(lv.len()),
            }
        }
        lv.reverse();
        Ok(lv)
    }
}

fn validate(l: usize, lambda: f64, mu: f64, m0: f64, m1: f64, opts: &AqpaOptions) -> Result<()> {
    if l == 0 {
        return Err(Error::Config("codebook needs at least one level".into()));
    }
    if !(lambda.is_finite() && mu.is_finite()) || lambda < 0.0 || mu < 0.0 {
        return Err(Error::Config(format!(
            "multipliers must be finite and nonnegative: lambda={lambda}, mu={mu}"
        )));
    }
    if lambda == 0.0 && mu == 0.0 {
        return Err(Error::UndefinedWaterLevel);
    }
    if !(m0.is_finite() && m0 > 0.0 && m1.is_finite() && m1 > 0.0) {
        return Err(Error::Config(format!("channel means must be positive: m0={m0}, m1={m1}")));
    }
    if !(opts.eps_level > 0.0 && opts.eps_level < 1.0) || !(opts.tail > 1.0) {
        return Err(Error::Config("eps_level must be in (0,1) and tail > 1".into()));
    }
    Ok(())
}

/// Build a codebook of `l` levels for exponential gains with means `m0`
/// (interference link) and `m1` (secondary link) at duals `(lambda, mu)`.
/// Levels are returned in decreasing order; the lowest level is always 0.
pub fn build_codebook(
    l: usize,
    lambda: f64,
    mu: f64,
    m0: f64,
    m1: f64,
    opts: &AqpaOptions,
) -> Result<PowerCodebook> {
    build_codebook_hinted(l, lambda, mu, m0, m1, opts, None).map(|(cb, _)| cb)
}

/// As [`build_codebook`], warm-starting the shooting search from a previous
/// seed root and returning the seed actually used (for the next call).
pub(crate) fn build_codebook_hinted(
    l: usize,
    lambda: f64,
    mu: f64,
    m0: f64,
    m1: f64,
    opts: &AqpaOptions,
    seed_hint: Option<f64>,
) -> Result<(PowerCodebook, Option<f64>)> {
    validate(l, lambda, mu, m0, m1, opts)?;
    let ctx = Ctx { lambda, mu, m0, m1, gmax: opts.tail * m1 };
    let (levels, seed) = match l {
        1 => (vec![single_level(&ctx)], None),
        2 => (vec![two_level(&ctx), 0.0], None),
        _ => {
            let (lv, s) = shoot_ladder(&ctx, l, opts.eps_level, seed_hint)?;
            (lv, Some(s))
        }
    };
    Ok((PowerCodebook { levels }, seed))
}

/// One level serving the whole plane: root of
/// `E[g1/(1+g1 p)] = lambda + mu E[g0]`, clamped at zero.
fn single_level(ctx: &Ctx) -> f64 {
    let target = ctx.lambda + ctx.mu * ctx.m0;
    let mean_gain = |p: f64| -> f64 {
        let f = |g1: f64| g1 / (1.0 + g1 * p) * (-g1 / ctx.m1).exp() / ctx.m1;
        integrate(&f, 0.0, ctx.gmax, 1e-12, 1e-10)
    };
    if mean_gain(0.0) <= target {
        return 0.0;
    }
    let mut hi = 1.0;
    while mean_gain(hi) > target && hi < 1e12 {
        hi *= 2.0;
    }
    let r = crate::numeric::bisect(|p| mean_gain(p) - target, 0.0, hi, 1e-14, 1e-12, 200);
    r.root
}

/// Two levels `{p, 0}`: root of the topmost-region stationarity in `p`
/// (decreasing in `p`).
fn two_level(ctx: &Ctx) -> f64 {
    let res = |p: f64| ctx.top_residual(p, 0.0).unwrap_or(0.0);
    let mut lo = 1e-4;
    let mut hi = 0.2;
    // Expand while positive, but stop before the region leaves the
    // integration window entirely (where the residual plateaus at zero).
    while res(hi) > 0.0 && beta(hi, 0.0, ctx.lambda) < ctx.gmax {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if res(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 * hi.max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Shooting on the first unpinned level so the top region balances.
/// Returns the ladder and the converged seed (a warm start for nearby duals).
fn shoot_ladder(
    ctx: &Ctx,
    l: usize,
    eps: f64,
    seed_hint: Option<f64>,
) -> Result<(Vec<f64>, f64)> {
    let mut max_built = 2usize; // 0 and eps always fit
    let shoot = |seed: f64| -> (Option<f64>, Option<Vec<f64>>, usize) {
        match ctx.build_ladder(seed, l, eps) {
            Ok(lv) => {
                let r = ctx.top_residual(lv[0], lv[1]);
                (r, Some(lv), l)
            }
            Err(built) => (None, None, built),
        }
    };

    // Residual is decreasing in the seed: bracket [positive, non-positive].
    let floor = 2.0 * eps;
    let (mut lo, mut hi) = match seed_hint {
        Some(h) if h.is_finite() && h > floor => ((h / 1.3).max(floor), h * 1.3),
        _ => (floor, 0.1),
    };
    let mut expand = 0;
    loop {
        let (r, _, built) = shoot(lo);
        max_built = max_built.max(built);
        match r {
            Some(r) if r > 0.0 => break,
            _ if lo <= floor => break, // cannot go lower; bisection handles it
            _ => {
                lo = (lo / 2.0).max(floor);
                expand += 1;
                if expand > 100 {
                    break;
                }
            }
        }
    }
    let (mut r_hi, _, mut built) = shoot(hi);
    max_built = max_built.max(built);
    let mut tries = 0;
    while let Some(r) = r_hi {
        if r <= 0.0 || tries >= 100 {
            break;
        }
        hi *= 2.0;
        let out = shoot(hi);
        r_hi = out.0;
        built = out.2;
        max_built = max_built.max(built);
        tries += 1;
    }

    let mut best: Option<(Vec<f64>, f64)> = None;
    for _ in 0..80 {
        let mid = (lo * hi).sqrt();
        let (r, lv, built) = shoot(mid);
        max_built = max_built.max(built);
        match r {
            Some(r) if r >= 0.0 => {
                lo = mid;
                best = lv.map(|lv| (lv, mid));
            }
            _ => hi = mid,
        }
        if hi / lo < 1.0 + 1e-9 {
            break;
        }
    }
    if best.is_none() {
        // The minimal seed may still build a valid (slightly unbalanced)
        // ladder; prefer it over failing outright.
        let (_, lv, built) = shoot(lo);
        max_built = max_built.max(built);
        best = lv.map(|lv| (lv, lo));
    }
    best.ok_or(Error::CodebookExhausted { built: max_built, requested: l })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(levels: &[f64], expect: &[f64], tol: f64) {
        assert_eq!(levels.len(), expect.len());
        for (a, b) in levels.iter().zip(expect) {
            assert!((a - b).abs() < tol, "{levels:?} vs {expect:?}");
        }
    }

    #[test]
    fn ladder_matches_reference_mu_positive() {
        // Independent quadrature/root reference for L=8, lambda=mu=0.1.
        let cb = build_codebook(8, 0.1, 0.1, 1.0, 1.0, &AqpaOptions::default()).unwrap();
        assert_close(
            &cb.levels,
            &[8.0044, 6.0855, 4.5518, 3.2777, 2.1788, 1.1608, 1e-6, 0.0],
            2e-3,
        );
    }

    #[test]
    fn ladder_matches_reference_mu_zero() {
        let cb = build_codebook(8, 0.5, 0.0, 1.0, 1.0, &AqpaOptions::default()).unwrap();
        assert_close(
            &cb.levels,
            &[1.6713, 1.4376, 1.1973, 0.9377, 0.6535, 0.3417, 1e-6, 0.0],
            2e-3,
        );
    }

    #[test]
    fn small_ladders_match_references() {
        let cb = build_codebook(4, 1.0, 1.0, 1.0, 1.0, &AqpaOptions::default()).unwrap();
        assert_close(&cb.levels, &[0.47066, 0.1973, 1e-6, 0.0], 2e-3);
        let cb = build_codebook(3, 0.1, 0.1, 1.0, 1.0, &AqpaOptions::default()).unwrap();
        assert_close(&cb.levels, &[4.50184, 1e-6, 0.0], 2e-3);
    }

    #[test]
    fn two_level_roots_match_references() {
        for (lam, mu, expect) in [
            (0.1, 0.1, 4.50183743),
            (0.5, 0.0, 1.30223945),
            (0.05, 0.3, 4.07999638),
        ] {
            let cb = build_codebook(2, lam, mu, 1.0, 1.0, &AqpaOptions::default()).unwrap();
            assert!((cb.levels[0] - expect).abs() < 2e-3, "{:?} vs {expect}", cb.levels);
            assert_eq!(cb.levels[1], 0.0);
        }
    }

    #[test]
    fn ladders_are_strictly_descending_with_pinned_tail() {
        for (l, lam, mu) in [(16, 0.05, 0.05), (8, 0.02, 0.3), (4, 2.0, 0.0)] {
            let cb = build_codebook(l, lam, mu, 1.0, 1.0, &AqpaOptions::default()).unwrap();
            assert_eq!(cb.levels.len(), l);
            assert!(cb.levels.windows(2).all(|w| w[0] > w[1]), "{:?}", cb.levels);
            assert_eq!(cb.levels[l - 1], 0.0);
            assert_eq!(cb.levels[l - 2], DEFAULT_EPS_LEVEL);
        }
    }

    #[test]
    fn single_level_solves_population_stationarity() {
        let cb = build_codebook(1, 0.3, 0.0, 1.0, 1.0, &AqpaOptions::default()).unwrap();
        let p = cb.levels[0];
        assert!(p > 0.0);
        // Verify E[g1/(1+g1 p)] = lambda at the root.
        let g = |g1: f64| g1 / (1.0 + g1 * p) * (-g1).exp();
        let lhs = integrate(&g, 0.0, 25.0, 1e-12, 1e-10);
        assert!((lhs - 0.3).abs() < 1e-6, "{lhs}");
        // Saturated prices clamp to zero.
        let cb = build_codebook(1, 1.2, 0.0, 1.0, 1.0, &AqpaOptions::default()).unwrap();
        assert_eq!(cb.levels[0], 0.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let o = AqpaOptions::default();
        assert!(build_codebook(0, 0.1, 0.1, 1.0, 1.0, &o).is_err());
        assert!(build_codebook(4, 0.0, 0.0, 1.0, 1.0, &o).is_err());
        assert!(build_codebook(4, -0.1, 0.1, 1.0, 1.0, &o).is_err());
        assert!(build_codebook(4, 0.1, 0.1, 0.0, 1.0, &o).is_err());
    }

    #[test]
    fn scales_with_channel_means() {
        // Stronger secondary link supports higher powers at the same duals.
        let weak = build_codebook(4, 0.2, 0.1, 1.0, 0.5, &AqpaOptions::default()).unwrap();
        let strong = build_codebook(4, 0.2, 0.1, 1.0, 2.0, &AqpaOptions::default()).unwrap();
        assert!(strong.levels[0] > weak.levels[0]);
    }
}
