use serde::Serialize;

use super::em::solve_un;
use crate::error::{Error, Result};
use crate::gmm::{Observations, Theta};
use crate::numeric::dot;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreVariant {
    Iid,
    Lowtemp,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreStatistic {
    pub delta: Vec<f64>,
    pub variant: ScoreVariant,
    pub u_center: Option<f64>,
}

fn centered(x: &Observations, theta0: &Theta, shift: f64) -> Result<Vec<f64>> {
    if theta0.dim() != x.d() {
        return Err(Error::InvalidSize("theta0 and data dimensions differ".into()));
    }
    let th = theta0.as_slice();
    let w: Vec<f64> = x.rows().map(|r| (shift + dot(th, r)).tanh()).collect();
    let rn = (x.n() as f64).sqrt();
    Ok(x.weighted_mean(&w).iter().zip(th).map(|(a, t)| rn * (a - t)).collect())
}

/// `Δ = √n ((1/n) Σ X_i tanh(θ₀ᵀX_i) - θ₀)`.
pub fn score_iid(x: &Observations, theta0: &Theta) -> Result<ScoreStatistic> {
    Ok(ScoreStatistic { delta: centered(x, theta0, 0.0)?, variant: ScoreVariant::Iid, u_center: None })
}

/// `Δ̃ = √n ((1/n) Σ X_i tanh(βU_n + θ₀ᵀX_i) - θ₀)`.
pub fn score_lowtemp(x: &Observations, theta0: &Theta, beta: f64) -> Result<ScoreStatistic> {
    let un = solve_un(x, theta0, beta)?;
    Ok(ScoreStatistic {
        delta: centered(x, theta0, beta * un)?,
        variant: ScoreVariant::Lowtemp,
        u_center: Some(un),
    })
}
