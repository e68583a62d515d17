//! EM-type fixed-point solvers for `N_n`, `M_n` and the aMLE objective, plus `U_n`.

use log::warn;
use nalgebra::DMatrix;

use super::objectives::{grad_mn, mn_unchecked, objective_nn};
use super::{EstimateResult, EstimatorKind, FitOptions};
use crate::error::{Error, Result};
use crate::gmm::{canonicalize_theta, halfspace_side, HalfSpace, Observations, Theta};
use crate::numeric::{dot, golden_section, log_cosh};
use crate::theory::solve_m;

/// Mean-field `u`-update variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MfUpdate {
    /// `u ← (1/n) Σ tanh(βu + θᵀX_i)`, the stationarity condition of `M_n` in `u`.
    #[default]
    Stationary,
    /// `u ← β (1/n) Σ tanh(βu + θᵀX_i)`, clamped to `[-1, 1]`; kept for comparison only.
    ScaledByBeta,
}

/// Moment initialiser: `E XXᵀ = I + θθᵀ`, so the top eigenpair `(λ, v)` of the
/// sample second moment gives `θ ≈ sqrt(λ - 1) v`.
pub fn default_init(x: &Observations) -> Theta {
    let d = x.d();
    let mut m = DMatrix::<f64>::zeros(d, d);
    for r in x.rows() {
        for a in 0..d {
            for b in 0..d {
                m[(a, b)] += r[a] * r[b];
            }
        }
    }
    m /= x.n() as f64;
    let eig = m.symmetric_eigen();
    let k = eig.eigenvalues.imax();
    let scale = (eig.eigenvalues[k] - 1.0).max(1e-2).sqrt();
    let v: Vec<f64> = eig.eigenvectors.column(k).iter().map(|c| c * scale).collect();
    canonicalize_theta(&v).unwrap_or_else(|_| {
        let mut e = vec![0.0; d];
        e[0] = 1.0;
        Theta::new(e).expect("unit vector")
    })
}

fn to_theta(v: &[f64]) -> Result<Theta> {
    canonicalize_theta(v).map_err(|_| Error::Numerical("iteration collapsed to theta = 0".into()))
}

/// `(1/n) Σ X_i tanh(a + θᵀX_i)` together with `(1/n) Σ tanh(a + θᵀX_i)`.
fn tanh_moments(x: &Observations, a: f64, theta: &[f64]) -> (f64, Vec<f64>) {
    let w: Vec<f64> = x.rows().map(|r| (a + dot(theta, r)).tanh()).collect();
    (w.iter().sum::<f64>() / x.n() as f64, x.weighted_mean(&w))
}

/// Iterates `θ ← (1/n) Σ X_i tanh(shift + θᵀX_i)` until the gradient `θ - T(θ)` is below `tol`.
fn theta_fixed_point(
    x: &Observations,
    shift: f64,
    init: &[f64],
    opts: &FitOptions,
    objective: impl Fn(&[f64]) -> f64,
) -> (Vec<f64>, usize, bool, f64, Vec<f64>) {
    let mut theta = init.to_vec();
    let mut trace = Vec::new();
    if opts.record_trace {
        trace.push(objective(&theta));
    }
    for it in 0..opts.max_iter {
        let (_, next) = tanh_moments(x, shift, &theta);
        let g = theta.iter().zip(&next).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        if g <= opts.tol {
            return (theta, it, true, g, trace);
        }
        theta = next;
        if opts.record_trace {
            trace.push(objective(&theta));
        }
    }
    let (_, next) = tanh_moments(x, shift, &theta);
    let g = theta.iter().zip(&next).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    (theta, opts.max_iter, g <= opts.tol, g, trace)
}

/// `θ̂ⁱⁱᵈ`: EM for the iid-label likelihood `N_n`.
pub fn em_iid(x: &Observations, init: &Theta, opts: &FitOptions) -> Result<EstimateResult> {
    check_opts(opts, init.dim(), x)?;
    let (theta, iterations, converged, g, trace) =
        theta_fixed_point(x, 0.0, init.as_slice(), opts, |t| objective_nn(x, t));
    let theta_hat = to_theta(&theta)?;
    Ok(EstimateResult {
        estimator: EstimatorKind::Iid,
        objective_value: objective_nn(x, theta_hat.as_slice()),
        theta_hat,
        u_hat: None,
        iterations,
        converged,
        final_grad_norm: g,
        trace,
    })
}

fn check_opts(opts: &FitOptions, d: usize, x: &Observations) -> Result<()> {
    if !(opts.tol > 0.0) {
        return Err(Error::Usage(format!("tol must be positive, got {}", opts.tol)));
    }
    if d != x.d() {
        return Err(Error::InvalidSize(format!("theta has dimension {d}, data has {}", x.d())));
    }
    Ok(())
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::Domain(format!("beta must be finite and >= 0, got {beta}")));
    }
    Ok(())
}

/// Side of `x̄`, treating the zero boundary as `Θ₁` with a warning.
fn xbar_sign(x: &Observations) -> f64 {
    let side = halfspace_side(x.xbar());
    if side == HalfSpace::BoundaryZero {
        warn!("sample mean is exactly zero; treating it as lying in the canonical half-space");
    }
    side.sign()
}

/// MF fit started from `(±m(β), θ̂ⁱⁱᵈ)` for an already computed `θ̂ⁱⁱᵈ`.
pub(crate) fn em_mf_from_iid(x: &Observations, beta: f64, iid: &Theta, opts: &FitOptions) -> Result<EstimateResult> {
    check_beta(beta)?;
    em_mf(x, beta, xbar_sign(x) * solve_m(beta), iid, opts)
}

/// Orients `θ` so that `sign(θᵀx̄)` agrees with `sign(u)`, matching the joint symmetry
/// `(u, θ) → (-u, -θ)`.
fn oriented(theta: &[f64], u: f64, xbar: &[f64]) -> Vec<f64> {
    if u != 0.0 && dot(theta, xbar) * u < 0.0 {
        theta.iter().map(|c| -c).collect()
    } else {
        theta.to_vec()
    }
}

/// Recommended mean-field starting point `(m̃, θ̂ⁱⁱᵈ)`.
pub fn mf_default_init(x: &Observations, beta: f64) -> Result<(f64, Theta)> {
    let iid = em_iid(x, &default_init(x), &FitOptions::default())?;
    Ok((xbar_sign(x) * solve_m(beta), iid.theta_hat))
}

/// `(Û_n, θ̂ᴹᶠ)` minimising `M_n` with the stationary update.
pub fn em_mf(
    x: &Observations,
    beta: f64,
    init_u: f64,
    init_theta: &Theta,
    opts: &FitOptions,
) -> Result<EstimateResult> {
    em_mf_with(x, beta, init_u, init_theta, opts, MfUpdate::Stationary)
}

pub fn em_mf_with(
    x: &Observations,
    beta: f64,
    init_u: f64,
    init_theta: &Theta,
    opts: &FitOptions,
    update: MfUpdate,
) -> Result<EstimateResult> {
    check_beta(beta)?;
    check_opts(opts, init_theta.dim(), x)?;
    if !(init_u.abs() <= 1.0) {
        return Err(Error::Domain(format!("initial u = {init_u} outside [-1, 1]")));
    }
    let mut u = if beta == 0.0 { 0.0 } else { init_u };
    let mut theta = oriented(init_theta.as_slice(), u, x.xbar());
    let mut trace = Vec::new();
    if opts.record_trace {
        trace.push(mn_unchecked(x, beta, u, &theta));
    }
    let grad_norm = |u: f64, theta: &[f64]| {
        let (f1, f2) = grad_mn(x, beta, u, theta);
        (f1 * f1 + f2.iter().map(|v| v * v).sum::<f64>()).sqrt()
    };
    let mut iterations = opts.max_iter;
    let mut converged = false;
    for it in 0..opts.max_iter {
        let (mean_w, next_theta) = tanh_moments(x, beta * u, &theta);
        let next_u = match (beta == 0.0, update) {
            (true, _) => 0.0,
            (false, MfUpdate::Stationary) => mean_w,
            (false, MfUpdate::ScaledByBeta) => (beta * mean_w).clamp(-1.0, 1.0),
        };
        let step = ((next_u - u).powi(2)
            + theta.iter().zip(&next_theta).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        .sqrt();
        let done = match update {
            MfUpdate::Stationary => {
                let f1 = beta * (u - mean_w);
                let f2: f64 = theta.iter().zip(&next_theta).map(|(a, b)| (a - b) * (a - b)).sum();
                (f1 * f1 + f2).sqrt() <= opts.tol
            }
            MfUpdate::ScaledByBeta => step <= opts.tol,
        };
        if done {
            iterations = it;
            converged = true;
            break;
        }
        u = next_u;
        theta = next_theta;
        if opts.record_trace {
            trace.push(mn_unchecked(x, beta, u, &theta));
        }
    }
    let g = grad_norm(u, &theta);
    if !converged && update == MfUpdate::Stationary {
        converged = g <= opts.tol;
    }
    let flip = halfspace_side(&theta) == HalfSpace::Theta2;
    let theta_hat = to_theta(&theta)?;
    let u_hat = if flip { -u } else { u };
    Ok(EstimateResult {
        estimator: EstimatorKind::Mf,
        objective_value: mn_unchecked(x, beta, u_hat, theta_hat.as_slice()),
        theta_hat,
        u_hat: Some(u_hat),
        iterations,
        converged,
        final_grad_norm: g,
        trace,
    })
}

pub const UN_GRID_POINTS: usize = 2001;

/// `U_n = argmin_{|u| ≤ 1} M_n(u, θ₀)`: grid scan then golden-section refinement;
/// exact ties go to the half-space side of `x̄`; `0` when `β = 0`.
pub fn solve_un(x: &Observations, theta0: &Theta, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    if theta0.dim() != x.d() {
        return Err(Error::InvalidSize("theta0 and data dimensions differ".into()));
    }
    if beta == 0.0 {
        return Ok(0.0);
    }
    let c = x.project(theta0.as_slice());
    let n = c.len() as f64;
    let profile = |u: f64| 0.5 * beta * u * u - c.iter().map(|ci| log_cosh(beta * u + ci)).sum::<f64>() / n;
    let h = 2.0 / (UN_GRID_POINTS - 1) as f64;
    let vals: Vec<f64> = (0..UN_GRID_POINTS).map(|k| profile(-1.0 + h * k as f64)).collect();
    let refine = |range: std::ops::Range<usize>| -> (f64, f64) {
        let k = range
            .clone()
            .min_by(|&a, &b| vals[a].total_cmp(&vals[b]))
            .expect("non-empty range");
        let lo = (-1.0 + h * k.saturating_sub(1) as f64).max(-1.0);
        let hi = (-1.0 + h * (k + 1) as f64).min(1.0);
        let u = golden_section(profile, lo, hi, 1e-10);
        let (u, f) = if profile(u) <= vals[k] { (u, profile(u)) } else { (-1.0 + h * k as f64, vals[k]) };
        (u, f)
    };
    let mid = UN_GRID_POINTS / 2;
    let (u_neg, f_neg) = refine(0..mid + 1);
    let (u_pos, f_pos) = refine(mid..UN_GRID_POINTS);
    let tie = (f_neg - f_pos).abs() <= 1e-14 * f_pos.abs().max(1.0);
    Ok(if tie {
        if xbar_sign(x) > 0.0 {
            u_pos
        } else {
            u_neg
        }
    } else if f_pos < f_neg {
        u_pos
    } else {
        u_neg
    })
}

/// `θ̂ᵃᴹᴸᴱ`: fixed point of `θ ← (1/n) Σ X_i tanh(βm̃ + θᵀX_i)` with `m̃ = ±m(β)` by the side of `x̄`.
pub fn amle(x: &Observations, beta: f64, opts: &FitOptions) -> Result<EstimateResult> {
    check_beta(beta)?;
    let iid = em_iid(x, &default_init(x), &FitOptions { record_trace: false, ..*opts })?;
    amle_from(x, beta, &iid.theta_hat, opts)
}

pub(crate) fn amle_from(x: &Observations, beta: f64, init: &Theta, opts: &FitOptions) -> Result<EstimateResult> {
    check_beta(beta)?;
    check_opts(opts, init.dim(), x)?;
    let m_tilde = xbar_sign(x) * solve_m(beta);
    let shift = beta * m_tilde;
    let objective = |t: &[f64]| {
        0.5 * dot(t, t) - x.rows().map(|r| log_cosh(shift + dot(t, r))).sum::<f64>() / x.n() as f64
    };
    let start = oriented(init.as_slice(), m_tilde, x.xbar());
    let (theta, iterations, converged, g, trace) = theta_fixed_point(x, shift, &start, opts, &objective);
    let theta_hat = to_theta(&theta)?;
    Ok(EstimateResult {
        estimator: EstimatorKind::Amle,
        objective_value: objective(&theta),
        theta_hat,
        u_hat: Some(m_tilde),
        iterations,
        converged,
        final_grad_norm: g,
        trace,
    })
}
