use crate::error::{Error, Result};
use crate::gmm::Observations;
use crate::numeric::{dot, log_cosh};

/// `N_n(θ) = θᵀθ/2 - (1/n) Σ log cosh(θᵀX_i)`.
pub fn objective_nn(x: &Observations, theta: &[f64]) -> f64 {
    let n = x.n() as f64;
    0.5 * dot(theta, theta) - x.rows().map(|r| log_cosh(dot(theta, r))).sum::<f64>() / n
}

/// `∇N_n(θ) = θ - (1/n) Σ X_i tanh(θᵀX_i)`.
pub fn grad_nn(x: &Observations, theta: &[f64]) -> Vec<f64> {
    let w: Vec<f64> = x.rows().map(|r| dot(theta, r).tanh()).collect();
    let t = x.weighted_mean(&w);
    theta.iter().zip(t).map(|(a, b)| a - b).collect()
}

/// `M_n(u, θ) = θᵀθ/2 + βu²/2 - (1/n) Σ log cosh(βu + θᵀX_i)` for `|u| ≤ 1`.
pub fn objective_mn(x: &Observations, beta: f64, u: f64, theta: &[f64]) -> Result<f64> {
    if !(u.abs() <= 1.0) {
        return Err(Error::Domain(format!("u = {u} outside [-1, 1]")));
    }
    Ok(mn_unchecked(x, beta, u, theta))
}

pub(crate) fn mn_unchecked(x: &Observations, beta: f64, u: f64, theta: &[f64]) -> f64 {
    let n = x.n() as f64;
    let bu = beta * u;
    0.5 * dot(theta, theta) + 0.5 * beta * u * u
        - x.rows().map(|r| log_cosh(bu + dot(theta, r))).sum::<f64>() / n
}

/// `(F₁, F₂) = ∇M_n`: `F₁ = β(u - (1/n)Σ tanh(βu + θᵀX_i))`, `F₂ = θ - (1/n)Σ X_i tanh(βu + θᵀX_i)`.
pub fn grad_mn(x: &Observations, beta: f64, u: f64, theta: &[f64]) -> (f64, Vec<f64>) {
    let bu = beta * u;
    let w: Vec<f64> = x.rows().map(|r| (bu + dot(theta, r)).tanh()).collect();
    let mean_w = w.iter().sum::<f64>() / x.n() as f64;
    let t = x.weighted_mean(&w);
    (
        beta * (u - mean_w),
        theta.iter().zip(t).map(|(a, b)| a - b).collect(),
    )
}
