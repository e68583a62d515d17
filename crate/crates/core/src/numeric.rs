//! Small numerical kernels shared across modules.

use std::f64::consts::LN_2;

/// `log cosh(t)` evaluated as `|t| + log(1 + e^{-2|t|}) - log 2`, finite for every finite `t`.
#[inline]
pub fn log_cosh(t: f64) -> f64 {
    let a = t.abs();
    a + (-2.0 * a).exp().ln_1p() - LN_2
}

/// `log(2 cosh(t))`.
#[inline]
pub fn log_2cosh(t: f64) -> f64 {
    let a = t.abs();
    a + (-2.0 * a).exp().ln_1p()
}

#[inline]
pub fn sech2(t: f64) -> f64 {
    let th = t.tanh();
    1.0 - th * th
}

/// Binary entropy in KL form, `KL(Rad((1+u)/2) || Rad(1/2))`, with `0 log 0 = 0`.
pub fn kl_entropy(u: f64) -> f64 {
    let p = 0.5 * (1.0 + u);
    let q = 0.5 * (1.0 - u);
    xlogx(p) + xlogx(q) + LN_2
}

#[inline]
fn xlogx(p: f64) -> f64 {
    if p <= 0.0 {
        0.0
    } else {
        p * p.ln()
    }
}

/// Numerically stable `log Σ exp(v_i)`. Returns `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let s: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + s.ln()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Golden-section minimisation of a unimodal function on `[lo, hi]`.
pub fn golden_section<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    while hi - lo > tol {
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
        }
    }
    0.5 * (lo + hi)
}

/// Bisection for a sign change of `f` on `[lo, hi]`.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let mut flo = f(lo);
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_cosh_matches_direct_formula() {
        for &t in &[-3.0, -0.5, 0.0, 1e-8, 0.7, 2.0, 10.0] {
            let direct = f64::cosh(t).ln();
            assert!((log_cosh(t) - direct).abs() < 1e-14, "t={t}");
        }
        // no overflow where cosh itself overflows
        assert!((log_cosh(1000.0) - (1000.0 - LN_2)).abs() < 1e-12);
        assert_eq!(log_cosh(-5.0), log_cosh(5.0));
    }

    #[test]
    fn entropy_endpoints() {
        assert!(kl_entropy(0.0).abs() < 1e-15);
        assert_eq!(kl_entropy(1.0), LN_2);
        assert_eq!(kl_entropy(-1.0), LN_2);
    }

    #[test]
    fn lse_basic() {
        let v = [1000.0, 1000.0];
        assert!((log_sum_exp(&v) - (1000.0 + LN_2)).abs() < 1e-12);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
    }

    #[test]
    fn golden_finds_parabola_min() {
        let x = golden_section(|x| (x - 0.3).powi(2), -1.0, 1.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-9);
    }
}
