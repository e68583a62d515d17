//! Plug-in procedure when the inverse temperature is unknown: detect the low-temperature
//! regime from `‖x̄‖`, then invert `m = tanh(βm)` at `m̂ = ‖x̄‖/‖θ̂ⁱⁱᵈ‖`.

use serde::Serialize;

use super::em::{default_init, em_iid};
use super::FitOptions;
use crate::error::{Error, Result};
use crate::gmm::{Observations, Theta};
use crate::numeric::norm;

const M_CLAMP: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    High,
    Low,
}

#[derive(Debug, Clone, Serialize)]
pub struct BetaEstimate {
    pub regime: Regime,
    pub beta_hat: Option<f64>,
    pub m_hat: Option<f64>,
    /// `m̂` was at or beyond the clamp bounds before `atanh` was applied.
    pub m_clamped: bool,
    pub xbar_norm: f64,
    pub tau: f64,
    pub theta_hat: Theta,
}

/// Detection threshold `τ_n = n^{-1/8}`.
pub fn tau_n(n: usize) -> f64 {
    (n as f64).powf(-0.125)
}

/// `atanh(m)/m`, continuous at `m = 0`.
pub(crate) fn beta_from_m(m: f64) -> f64 {
    if m.abs() < 1e-6 {
        1.0 + m * m / 3.0
    } else {
        m.atanh() / m
    }
}

pub fn estimate_beta_unknown(x: &Observations) -> Result<BetaEstimate> {
    if x.n() < 2 {
        return Err(Error::InvalidSize("unknown-temperature estimation needs n >= 2".into()));
    }
    let iid = em_iid(x, &default_init(x), &FitOptions::default())?;
    let xbar_norm = norm(x.xbar());
    let tau = tau_n(x.n());
    let (regime, beta_hat, m_hat, m_clamped) = if xbar_norm > tau {
        let raw = xbar_norm / iid.theta_hat.norm();
        let clamped = raw.clamp(M_CLAMP, 1.0 - M_CLAMP);
        if raw >= 1.0 {
            log::warn!("m_hat = {raw} >= 1 before clamping");
        }
        (Regime::Low, Some(beta_from_m(clamped)), Some(clamped), clamped != raw)
    } else {
        (Regime::High, None, None, false)
    };
    Ok(BetaEstimate { regime, beta_hat, m_hat, m_clamped, xbar_norm, tau, theta_hat: iid.theta_hat })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gmm::generate;
    use crate::labels::CwSampler;
    use crate::rng::substream;

    #[test]
    fn boundary_limit_is_one() {
        assert!((beta_from_m(1e-9) - 1.0).abs() < 1e-12);
        assert!((beta_from_m(1e-5) - 1.0).abs() < 1e-9);
        let m = crate::theory::solve_m(1.5);
        assert!((beta_from_m(m) - 1.5).abs() < 1e-10);
    }

    #[test]
    fn regimes_on_small_study() {
        let theta = Theta::new(vec![1.0]).unwrap();
        let mut low_ok = 0;
        let mut high_ok = 0;
        let reps = 20;
        for r in 0..reps {
            let mut rng = substream(71, r);
            let z = CwSampler::new(4000, 1.5).unwrap().sample(&mut rng);
            let e = estimate_beta_unknown(&generate(&theta, &z, &mut rng).x).unwrap();
            low_ok += (e.regime == Regime::Low && (e.beta_hat.unwrap() - 1.5).abs() < 0.1) as usize;
            let z = CwSampler::new(4000, 0.0).unwrap().sample(&mut rng);
            let e = estimate_beta_unknown(&generate(&theta, &z, &mut rng).x).unwrap();
            high_ok += (e.regime == Regime::High) as usize;
        }
        assert!(low_ok >= 17, "{low_ok}");
        assert!(high_ok >= 19, "{high_ok}");
    }

    #[test]
    fn rejects_single_observation() {
        let x = Observations::from_rows(&[vec![1.0]]).unwrap();
        assert!(estimate_beta_unknown(&x).is_err());
    }
}
