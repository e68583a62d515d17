//! Fisher information of the paired model: labels come in pairs `(z₁, z₂)` with
//! `q(z₁, z₂) ∝ e^{βz₁z₂}`, pairs independent, `X_k | z_k ~ N(θ₀z_k, I)`.
//!
//! The pair score is `E_r[z₁] x₁ + E_r[z₂] x₂ - 2θ` with `r` the posterior over the four
//! label configurations; the per-observation information is `E[s sᵀ]/2`, estimated by
//! Monte Carlo.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gmm::Theta;
use crate::numeric::dot;
use crate::rng::substream;

#[derive(Debug, Clone, Serialize)]
pub struct PairedInfo {
    pub theta0: Theta,
    pub beta: f64,
    pub draws: u64,
    /// Row-major `d × d`.
    pub info: Vec<Vec<f64>>,
    /// Monte Carlo standard error of each entry.
    pub std_err: Vec<Vec<f64>>,
}

impl PairedInfo {
    pub fn info_matrix(&self) -> DMatrix<f64> {
        let d = self.info.len();
        DMatrix::from_fn(d, d, |i, j| self.info[i][j])
    }
}

const CHUNKS: u64 = 64;

/// Posterior means `(E z₁, E z₂)` given `a_k = θᵀx_k`.
fn posterior_means(beta: f64, a1: f64, a2: f64) -> (f64, f64) {
    let lw = [
        beta + a1 + a2,  // (+, +)
        -beta + a1 - a2, // (+, -)
        -beta - a1 + a2, // (-, +)
        beta - a1 - a2,  // (-, -)
    ];
    let mx = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = lw.iter().map(|l| (l - mx).exp()).collect();
    let z = w.iter().sum::<f64>();
    ((w[0] + w[1] - w[2] - w[3]) / z, (w[0] - w[1] + w[2] - w[3]) / z)
}

pub fn paired_fisher_info(theta0: &Theta, beta: f64, draws: u64, seed: u64) -> Result<PairedInfo> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::Domain(format!("beta must be finite and >= 0, got {beta}")));
    }
    if draws < 2 {
        return Err(Error::Usage("paired information needs at least 2 draws".into()));
    }
    let d = theta0.dim();
    let th = theta0.as_slice();
    let p_same = 1.0 / (1.0 + (-2.0 * beta).exp());
    let mut sum = DMatrix::<f64>::zeros(d, d);
    let mut sum_sq = DMatrix::<f64>::zeros(d, d);
    let mut x1 = vec![0.0; d];
    let mut x2 = vec![0.0; d];
    let per = draws / CHUNKS;
    for chunk in 0..CHUNKS {
        let mut rng = substream(seed, chunk);
        let count = if chunk == CHUNKS - 1 { draws - per * (CHUNKS - 1) } else { per };
        for _ in 0..count {
            let z1 = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let z2 = if rng.random::<f64>() < p_same { z1 } else { -z1 };
            for k in 0..d {
                x1[k] = th[k] * z1 + rng.sample::<f64, _>(StandardNormal);
                x2[k] = th[k] * z2 + rng.sample::<f64, _>(StandardNormal);
            }
            let (e1, e2) = posterior_means(beta, dot(th, &x1), dot(th, &x2));
            let s = DVector::from_fn(d, |k, _| e1 * x1[k] + e2 * x2[k] - 2.0 * th[k]);
            let v = &s * s.transpose() * 0.5;
            sum += &v;
            sum_sq += v.component_mul(&v);
        }
    }
    let nf = draws as f64;
    let mean = &sum / nf;
    let info = (0..d).map(|i| (0..d).map(|j| mean[(i, j)]).collect()).collect();
    let std_err = (0..d)
        .map(|i| {
            (0..d)
                .map(|j| {
                    let var = (sum_sq[(i, j)] / nf - mean[(i, j)].powi(2)).max(0.0) * nf / (nf - 1.0);
                    (var / nf).sqrt()
                })
                .collect()
        })
        .collect();
    Ok(PairedInfo { theta0: theta0.clone(), beta, draws, info, std_err })
}
