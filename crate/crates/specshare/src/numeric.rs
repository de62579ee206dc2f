//! Small numeric kernels: deterministic reductions, bisection, and
//! adaptive Simpson quadrature.
//!
//! Every Monte-Carlo reduction in the crate goes through [`pairwise_sum`]
//! so results are bit-identical run to run regardless of how the per-sample
//! work was parallelized: values are materialized in sample order and the
//! reduction tree depends only on the length.

/// Pairwise (cascade) summation.  Deterministic for a given input order and
/// more accurate than a naive left fold on long inputs.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BASE: usize = 64;
    if xs.len() <= BASE {
        let mut acc = 0.0;
        for &x in xs {
            acc += x;
        }
        acc
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

/// Arithmetic mean via [`pairwise_sum`]; 0 for an empty slice.
pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        pairwise_sum(xs) / xs.len() as f64
    }
}

/// Result of a scalar root search.
#[derive(Clone, Copy, Debug)]
pub struct RootResult {
    pub root: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// Bisection on `[lo, hi]`.  The caller guarantees `f(lo)` and `f(hi)` have
/// opposite signs (a zero endpoint is returned immediately).  Terminates when
/// the residual magnitude drops below `tol_res` or the interval shrinks below
/// `tol_x * max(1, |mid|)`.
pub fn bisect<F: FnMut(f64) -> f64>(
    mut f: F,
    mut lo: f64,
    mut hi: f64,
    tol_x: f64,
    tol_res: f64,
    max_iter: usize,
) -> RootResult {
    let f_lo = f(lo);
    if f_lo == 0.0 {
        return RootResult { root: lo, residual: 0.0, iterations: 0 };
    }
    let rising = f_lo < 0.0;
    let mut root = 0.5 * (lo + hi);
    let mut residual = f64::NAN;
    let mut iterations = 0;
    for it in 0..max_iter {
        iterations = it + 1;
        root = 0.5 * (lo + hi);
        residual = f(root);
        if residual.abs() < tol_res {
            break;
        }
        if (residual < 0.0) == rising {
            lo = root;
        } else {
            hi = root;
        }
        if (hi - lo).abs() < tol_x * root.abs().max(1.0) {
            root = 0.5 * (lo + hi);
            break;
        }
    }
    RootResult { root, residual, iterations }
}

/// Adaptive Simpson quadrature of `f` on `[a, b]`.
///
/// Classic recursive halving with the Richardson `15 eps` acceptance test;
/// the recursion also stops once the interval is narrower than `1e-14` times
/// the original span, so integrable kinks cannot recurse unboundedly.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> f64 {
    if a >= b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(a, b, fa, fm, fb);
    let min_span = (b - a) * 1e-14;
    adapt(f, a, b, fa, fm, fb, whole, abs_tol, rel_tol, min_span, 60)
}

/// Quadrature with interior split points (for integrands with known kinks).
pub fn integrate_with_knots<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    knots: &[f64],
    abs_tol: f64,
    rel_tol: f64,
) -> f64 {
    let mut cuts: Vec<f64> = knots.iter().copied().filter(|&x| x > a && x < b).collect();
    cuts.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let mut total = 0.0;
    let mut left = a;
    for c in cuts {
        total += integrate(f, left, c, abs_tol, rel_tol);
        left = c;
    }
    total + integrate(f, left, b, abs_tol, rel_tol)
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adapt<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    abs_tol: f64,
    rel_tol: f64,
    min_span: f64,
    depth: usize,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    let tol = abs_tol.max(rel_tol * (left + right).abs());
    if depth == 0 || (b - a) < min_span || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        adapt(f, a, m, fa, flm, fm, left, 0.5 * abs_tol, rel_tol, min_span, depth - 1)
            + adapt(f, m, b, fm, frm, fb, right, 0.5 * abs_tol, rel_tol, min_span, depth - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_exact_on_constant() {
        let xs = vec![0.25; 1 << 14];
        assert_eq!(pairwise_sum(&xs), (1 << 14) as f64 * 0.25);
    }

    #[test]
    fn pairwise_is_order_stable() {
        let xs: Vec<f64> = (0..9973).map(|i| ((i * 37) % 101) as f64 * 0.001 - 0.05).collect();
        assert_eq!(pairwise_sum(&xs), pairwise_sum(&xs));
    }

    #[test]
    fn bisect_finds_sqrt_two() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-14, 0.0, 200);
        assert!((r.root - 2f64.sqrt()).abs() < 1e-12, "{}", r.root);
    }

    #[test]
    fn bisect_respects_residual_tolerance() {
        let r = bisect(|x| x - 1.0, 0.0, 4.0, 0.0, 1e-3, 200);
        assert!(r.residual.abs() < 1e-3);
    }

    #[test]
    fn bisect_handles_decreasing_functions() {
        let r = bisect(|x| 1.0 - x * x * x, 0.0, 3.0, 1e-14, 0.0, 200);
        assert!((r.root - 1.0).abs() < 1e-12);
    }

    #[test]
    fn simpson_integrates_polynomial_exactly() {
        // Simpson is exact on cubics.
        let v = integrate(&|x| x * x * x - x, 0.0, 2.0, 1e-12, 1e-12);
        assert!((v - 2.0).abs() < 1e-12, "{v}");
    }

    #[test]
    fn simpson_matches_known_exponential_integral() {
        // E[log(1+g)] for Exponential(1), truncated far into the tail:
        // exp(1) * E1(1) = 0.59634736232319...
        let v = integrate(&|g| (1.0 + g).ln() * (-g).exp(), 0.0, 40.0, 1e-12, 1e-12);
        assert!((v - 0.596347362323194).abs() < 1e-9, "{v}");
    }

    #[test]
    fn knotted_integration_handles_kinks() {
        let f = |x: f64| (x - 1.0).abs();
        let v = integrate_with_knots(&f, 0.0, 2.0, &[1.0], 1e-13, 1e-13);
        assert!((v - 1.0).abs() < 1e-12);
    }
}
