//! Numerical verification of the algebraic identities linking `m`, `α`, `μ`, `ν`,
//! `Γ`, `Σ` and `I_β`. Residuals are `‖lhs - rhs‖ / max(‖rhs‖, 1)`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::info::{info_report, invert, MixtureMoments};
use super::quadrature::default_rule;
use crate::error::{Error, Result};
use crate::gmm::Theta;

#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    pub beta: f64,
    pub theta0: Theta,
    /// `true` when only the high-temperature subset was checked (`β ≤ 1`).
    pub reduced: bool,
    pub residuals: BTreeMap<String, f64>,
}

impl IdentityReport {
    pub fn max_residual(&self) -> f64 {
        self.residuals.values().copied().fold(0.0, f64::max)
    }

    pub fn all_below(&self, tol: f64) -> bool {
        self.residuals.values().all(|r| *r < tol)
    }
}

fn rel_scalar(lhs: f64, rhs: f64) -> f64 {
    (lhs - rhs).abs() / rhs.abs().max(1.0)
}

fn rel_vec(lhs: &DVector<f64>, rhs: &DVector<f64>) -> f64 {
    (lhs - rhs).norm() / rhs.norm().max(1.0)
}

fn rel_mat(lhs: &DMatrix<f64>, rhs: &DMatrix<f64>) -> f64 {
    (lhs - rhs).norm() / rhs.norm().max(1.0)
}

fn checked(name: &str, r: f64) -> Result<f64> {
    if r.is_finite() {
        Ok(r)
    } else {
        Err(Error::Numerical(format!("identity `{name}` produced a non-finite residual")))
    }
}

pub fn verify_identities(theta0: &Theta, beta: f64) -> Result<IdentityReport> {
    let rep = info_report(theta0, beta)?;
    let mm = MixtureMoments::new(default_rule(), theta0, beta, rep.m);
    let theta = DVector::from_column_slice(theta0.as_slice());
    let mut residuals = BTreeMap::new();
    let mut put = |name: &str, r: f64| -> Result<()> {
        residuals.insert(name.to_string(), checked(name, r)?);
        Ok(())
    };

    put("m_fixed_point", rel_scalar(mm.mean_tanh(), rep.m))?;
    put("theta_fixed_point", rel_vec(&mm.mean_x_tanh(), &theta))?;

    let reduced = beta <= 1.0;
    if reduced {
        put("i_beta_equals_i0", rel_mat(&rep.i_beta, &rep.i0))?;
    } else {
        let m = rep.m;
        let (mu1, mum1) = rep.mu;
        let (nu1, num1) = &rep.nu;
        put(
            "alpha0",
            rel_scalar(rep.alpha0, (1.0 - m * m) * (1.0 - (mu1 - mum1) / 2.0)),
        )?;
        put("alpha1", rel_vec(&rep.alpha1, &((nu1 - num1) * (-(1.0 - m * m) / 2.0))))?;

        let s11 = rep.sigma11.ok_or_else(|| Error::Numerical("sigma unavailable".into()))?;
        let s12 = rep.sigma12.as_ref().unwrap();
        let s22 = rep.sigma22.as_ref().unwrap();
        let dl = &rep.delta;
        let recon = dl * dl.transpose() * s11 - s12 * dl.transpose() - dl * s12.transpose() + s22;
        put("i_beta_reconstruction", rel_mat(&recon, &rep.i_beta))?;

        let g_inv = invert(&rep.gamma(), "Gamma")?;
        let sandwich = &g_inv * rep.sigma().unwrap() * &g_inv;
        let d = theta0.dim();
        let block = sandwich.view((1, 1), (d, d)).into_owned();
        put("inverse_sandwich", rel_mat(&(block * &rep.i_beta), &DMatrix::identity(d, d)))?;
    }

    Ok(IdentityReport { beta, theta0: theta0.clone(), reduced, residuals })
}
