//! Curie-Weiss random-field partition function through the Gaussian auxiliary variable:
//! `Z = ∫ sqrt(nβ/2π) e^{-nβy²/2} Π_i 2cosh(βy + c_i) dy = Σ_w exp(nβw̄²/2 + Σ_i c_i w_i)`.

use crate::auxfield;
use crate::error::{Error, Result};
use crate::gmm::Observations;
use crate::numeric::{kl_entropy, log_2cosh, log_sum_exp};

/// Log-density drop below the peak beyond which grid points are discarded.
const HULL_DROP: f64 = 60.0;
/// Fine-grid points per auxiliary standard deviation.
const FINE_PER_SCALE: f64 = 8.0;

/// Trapezoid rule for the auxiliary variable: nodes `y_k`, normalised posterior weights
/// `π_k`, and `(1/n) log Z`.
#[derive(Debug, Clone)]
pub struct AuxQuadrature {
    pub beta: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub logz_per_n: f64,
}

impl AuxQuadrature {
    pub fn new(beta: f64, fields: &[f64]) -> Result<Self> {
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(Error::Domain(format!("beta must be finite and >= 0, got {beta}")));
        }
        let n = fields.len();
        if n == 0 {
            return Err(Error::InvalidSize("need at least one observation".into()));
        }
        if beta == 0.0 {
            let lz = fields.iter().map(|c| log_2cosh(*c)).sum::<f64>() / n as f64;
            return Ok(Self { beta, nodes: vec![0.0], weights: vec![1.0], logz_per_n: lz });
        }
        let s = auxfield::scale(n, beta);
        let (lo, hi) = auxfield::window(n, beta);
        let g = |y: f64| auxfield::log_density(beta, fields, y);

        // coarse pass to bracket the region carrying the mass
        let hc = s.min((hi - lo) / 64.0);
        let kc = ((hi - lo) / hc).ceil() as usize;
        let coarse: Vec<f64> = (0..=kc).map(|k| g((lo + hc * k as f64).min(hi))).collect();
        let gmax = coarse.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !gmax.is_finite() {
            return Err(Error::Numerical("auxiliary log-density is not finite".into()));
        }
        let first = coarse.iter().position(|v| *v > gmax - HULL_DROP).unwrap();
        let last = coarse.iter().rposition(|v| *v > gmax - HULL_DROP).unwrap();
        let a = (lo + hc * first.saturating_sub(2) as f64).max(lo);
        let b = (lo + hc * (last + 2) as f64).min(hi);

        let kf = (((b - a) / (s / FINE_PER_SCALE)).ceil() as usize).max(2);
        let h = (b - a) / kf as f64;
        let nodes: Vec<f64> = (0..=kf).map(|k| a + h * k as f64).collect();
        let logw: Vec<f64> = nodes
            .iter()
            .enumerate()
            .map(|(k, &y)| {
                let end = if k == 0 || k == kf { 0.5 } else { 1.0 };
                g(y) + (end * h).ln()
            })
            .collect();
        let lse = log_sum_exp(&logw);
        let weights = logw.iter().map(|l| (l - lse).exp()).collect();
        let log_norm = 0.5 * (n as f64 * beta / (2.0 * std::f64::consts::PI)).ln();
        Ok(Self { beta, nodes, weights, logz_per_n: (lse + log_norm) / n as f64 })
    }

    /// `E^Q W_i = Σ_k π_k tanh(βy_k + c_i)`.
    pub fn posterior_means(&self, fields: &[f64]) -> Vec<f64> {
        fields
            .iter()
            .map(|c| {
                self.nodes
                    .iter()
                    .zip(&self.weights)
                    .map(|(y, w)| w * (self.beta * y + c).tanh())
                    .sum()
            })
            .collect()
    }
}

fn fields_of(x: &Observations, theta: &[f64]) -> Result<Vec<f64>> {
    if theta.len() != x.d() {
        return Err(Error::InvalidSize(format!(
            "theta has dimension {}, data has {}",
            theta.len(),
            x.d()
        )));
    }
    Ok(x.project(theta))
}

/// `(1/n) log Z_{n,β}(θ, X)` for the Curie-Weiss coupling.
pub fn logz_cw(x: &Observations, beta: f64, theta: &[f64]) -> Result<f64> {
    Ok(AuxQuadrature::new(beta, &fields_of(x, theta)?)?.logz_per_n)
}

/// Posterior means `E^{Q_θ} W_i`.
pub fn posterior_means_cw(x: &Observations, beta: f64, theta: &[f64]) -> Result<Vec<f64>> {
    let c = fields_of(x, theta)?;
    Ok(AuxQuadrature::new(beta, &c)?.posterior_means(&c))
}

/// `(1/n) Σ_i X_i E^{Q_θ} W_i`, the data term of `∇ (1/n) log Z`.
pub fn posterior_weighted_mean_cw(x: &Observations, beta: f64, theta: &[f64]) -> Result<Vec<f64>> {
    Ok(x.weighted_mean(&posterior_means_cw(x, beta, theta)?))
}

/// Mean-field lower bound on `(1/n) log Z`:
/// `βū²/2 + θᵀ(1/n)Σ X_i u_i - (1/n)Σ H(u_i) + log 2`, with `H` the KL-form entropy.
pub fn elbo_cw(x: &Observations, beta: f64, u: &[f64], theta: &[f64]) -> Result<f64> {
    if u.len() != x.n() {
        return Err(Error::InvalidSize(format!("{} mean-field parameters for n = {}", u.len(), x.n())));
    }
    if let Some(bad) = u.iter().find(|v| !(v.abs() <= 1.0)) {
        return Err(Error::Domain(format!("mean-field parameter {bad} outside [-1, 1]")));
    }
    let c = fields_of(x, theta)?;
    let n = x.n() as f64;
    let ubar = u.iter().sum::<f64>() / n;
    let lin = c.iter().zip(u).map(|(ci, ui)| ci * ui).sum::<f64>() / n;
    let ent = u.iter().map(|v| kl_entropy(*v)).sum::<f64>() / n;
    Ok(0.5 * beta * ubar * ubar + lin - ent + std::f64::consts::LN_2)
}
