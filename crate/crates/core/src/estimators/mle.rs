//! Exact Curie-Weiss maximum likelihood by BFGS on `θᵀθ/2 - (1/n) log Z(θ)`.

use super::em::{amle_from, default_init, em_iid, em_mf};
use super::partition::{logz_cw, posterior_weighted_mean_cw};
use super::{EstimateResult, EstimatorKind, FitOptions};
use crate::error::{Error, Result};
use crate::gmm::{canonicalize_theta, Observations, Theta};
use crate::numeric::{dot, norm};
use crate::theory::solve_m;

const FD_STEP: f64 = 1e-6;
const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACK: usize = 60;

fn objective(x: &Observations, beta: f64, theta: &[f64]) -> Result<f64> {
    Ok(0.5 * dot(theta, theta) - logz_cw(x, beta, theta)?)
}

fn analytic_grad(x: &Observations, beta: f64, theta: &[f64]) -> Result<Vec<f64>> {
    let m = posterior_weighted_mean_cw(x, beta, theta)?;
    Ok(theta.iter().zip(m).map(|(a, b)| a - b).collect())
}

fn fd_grad(x: &Observations, beta: f64, theta: &[f64]) -> Result<Vec<f64>> {
    let mut g = vec![0.0; theta.len()];
    let mut p = theta.to_vec();
    for k in 0..theta.len() {
        p[k] = theta[k] + FD_STEP;
        let up = objective(x, beta, &p)?;
        p[k] = theta[k] - FD_STEP;
        let down = objective(x, beta, &p)?;
        p[k] = theta[k];
        g[k] = (up - down) / (2.0 * FD_STEP);
    }
    Ok(g)
}

struct Run {
    theta: Vec<f64>,
    value: f64,
    grad_norm: f64,
    iterations: usize,
    converged: bool,
}

fn bfgs(x: &Observations, beta: f64, start: &[f64], opts: &FitOptions) -> Result<Run> {
    let d = start.len();
    let mut theta = start.to_vec();
    let mut f = objective(x, beta, &theta)?;
    let mut g = fd_grad(x, beta, &theta)?;
    let mut h = vec![vec![0.0; d]; d];
    for (i, row) in h.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let max_iter = opts.max_iter.min(500);
    for it in 0..max_iter {
        let ga = norm(&analytic_grad(x, beta, &theta)?);
        if ga <= opts.tol {
            return Ok(Run { theta, value: f, grad_norm: ga, iterations: it, converged: true });
        }
        let mut p: Vec<f64> = h.iter().map(|row| -dot(row, &g)).collect();
        let mut slope = dot(&g, &p);
        if slope >= 0.0 {
            // lost descent: restart from steepest descent
            for (i, row) in h.iter_mut().enumerate() {
                row.iter_mut().for_each(|v| *v = 0.0);
                row[i] = 1.0;
            }
            p = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
        }
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACK {
            let cand: Vec<f64> = theta.iter().zip(&p).map(|(t, pi)| t + alpha * pi).collect();
            let fc = objective(x, beta, &cand)?;
            if fc <= f + ARMIJO * alpha * slope {
                accepted = Some((cand, fc));
                break;
            }
            alpha *= 0.5;
        }
        let Some((cand, fc)) = accepted else {
            let ga = norm(&analytic_grad(x, beta, &theta)?);
            return Ok(Run { theta, value: f, grad_norm: ga, iterations: it, converged: ga <= opts.tol });
        };
        let gc = fd_grad(x, beta, &cand)?;
        let s: Vec<f64> = cand.iter().zip(&theta).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gc.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-16 {
            let rho = 1.0 / sy;
            let hy: Vec<f64> = h.iter().map(|row| dot(row, &y)).collect();
            let yhy = dot(&y, &hy);
            for i in 0..d {
                for j in 0..d {
                    h[i][j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
                }
            }
        }
        theta = cand;
        f = fc;
        g = gc;
    }
    let ga = norm(&analytic_grad(x, beta, &theta)?);
    Ok(Run { theta, value: f, grad_norm: ga, iterations: max_iter, converged: ga <= opts.tol })
}

/// Maximiser of the exact Curie-Weiss likelihood, multistarted from `θ̂ⁱⁱᵈ`, `θ̂ᴹᶠ`,
/// the aMLE and the direction of `x̄`.
pub fn exact_mle_cw(x: &Observations, beta: f64, opts: &FitOptions) -> Result<EstimateResult> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::Domain(format!("beta must be finite and >= 0, got {beta}")));
    }
    let inner = FitOptions { record_trace: false, ..FitOptions::default() };
    let iid = em_iid(x, &default_init(x), &inner)?;
    let mut starts = vec![iid.theta_hat.as_slice().to_vec()];
    if beta > 0.0 {
        let m_tilde = crate::gmm::halfspace_side(x.xbar()).sign() * solve_m(beta);
        let mf = em_mf(x, beta, m_tilde, &iid.theta_hat, &inner)?;
        starts.push(mf.theta_hat.as_slice().to_vec());
        starts.push(amle_from(x, beta, &iid.theta_hat, &inner)?.theta_hat.into_vec());
    }
    if let Ok(t) = canonicalize_theta(x.xbar()) {
        starts.push(t.into_vec());
    }
    let mut best: Option<Run> = None;
    let mut failures = 0;
    for s in &starts {
        match bfgs(x, beta, s, opts) {
            Ok(run) => {
                let better = match &best {
                    None => true,
                    Some(b) => (run.converged && !b.converged) || (run.converged == b.converged && run.value < b.value),
                };
                if better {
                    best = Some(run);
                }
            }
            Err(_) => failures += 1,
        }
    }
    let run = best.ok_or_else(|| Error::Numerical(format!("all {failures} MLE starts failed")))?;
    let theta_hat: Theta = canonicalize_theta(&run.theta)
        .map_err(|_| Error::Numerical("MLE collapsed to theta = 0".into()))?;
    Ok(EstimateResult {
        estimator: EstimatorKind::MleCw,
        theta_hat,
        u_hat: None,
        iterations: run.iterations,
        converged: run.converged,
        final_grad_norm: run.grad_norm,
        objective_value: run.value,
        trace: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gmm::generate;
    use crate::labels::{config_from_index, CwSampler};
    use crate::numeric::log_sum_exp;
    use crate::rng::from_seed;

    fn cw_data(n: usize, beta: f64, seed: u64) -> Observations {
        let mut rng = from_seed(seed);
        let z = CwSampler::new(n, beta).unwrap().sample(&mut rng);
        generate(&Theta::new(vec![1.0]).unwrap(), &z, &mut rng).x
    }

    #[test]
    fn beta_zero_equals_iid() {
        let x = cw_data(200, 0.0, 51);
        let a = em_iid(&x, &default_init(&x), &FitOptions::default()).unwrap();
        let b = exact_mle_cw(&x, 0.0, &FitOptions::with_tol(1e-8)).unwrap();
        assert!(b.converged);
        assert!((a.theta_hat.as_slice()[0] - b.theta_hat.as_slice()[0]).abs() < 1e-6);
    }

    #[test]
    fn small_n_matches_enumeration_grid() {
        let n = 12;
        let beta = 1.5;
        let x = cw_data(n, beta, 52);
        let configs: Vec<(f64, f64)> = (0..1usize << n)
            .map(|idx| {
                let w = config_from_index(idx, n);
                let s: f64 = w.iter().map(|&v| v as f64).sum();
                let sx: f64 = w.iter().zip(x.rows()).map(|(&v, r)| v as f64 * r[0]).sum();
                (beta * s * s / (2.0 * n as f64), sx)
            })
            .collect();
        let loglik = |t: f64| {
            let terms: Vec<f64> = configs.iter().map(|(a, b)| a + t * b).collect();
            -0.5 * n as f64 * t * t + log_sum_exp(&terms)
        };
        let mut best = (0.0, f64::NEG_INFINITY);
        for k in 0..=40_000 {
            let t = 1e-4 * k as f64;
            let v = loglik(t);
            if v > best.1 {
                best = (t, v);
            }
        }
        let r = exact_mle_cw(&x, beta, &FitOptions::with_tol(1e-7)).unwrap();
        assert!(r.converged, "{r:?}");
        assert!((r.theta_hat.as_slice()[0] - best.0).abs() < 2e-4, "{} vs {}", r.theta_hat.as_slice()[0], best.0);
    }

    #[test]
    fn two_dim_converges() {
        let mut rng = from_seed(53);
        let z = CwSampler::new(300, 1.5).unwrap().sample(&mut rng);
        let x = generate(&Theta::new(vec![1.0, 0.5]).unwrap(), &z, &mut rng).x;
        let r = exact_mle_cw(&x, 1.5, &FitOptions::with_tol(1e-7)).unwrap();
        assert!(r.converged && r.final_grad_norm <= 1e-7);
    }
}
