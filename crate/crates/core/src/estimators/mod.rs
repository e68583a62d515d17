//! Objectives, fixed-point solvers, the Curie-Weiss partition function and exact MLE,
//! score statistics and the unknown-temperature pipeline.

mod em;
mod mle;
mod objectives;
mod partition;
mod score;
mod unknown_beta;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use em::{amle, default_init, em_iid, em_mf, em_mf_with, mf_default_init, solve_un, MfUpdate};
pub use mle::exact_mle_cw;
pub use objectives::{grad_mn, grad_nn, objective_mn, objective_nn};
pub use partition::{elbo_cw, logz_cw, posterior_means_cw, posterior_weighted_mean_cw, AuxQuadrature};
pub use score::{score_iid, score_lowtemp, ScoreStatistic, ScoreVariant};
pub use unknown_beta::{estimate_beta_unknown, tau_n, BetaEstimate, Regime};

use crate::error::{Error, Result};
use crate::gmm::{Observations, Theta};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Iid,
    Mf,
    Amle,
    MleCw,
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Iid => "iid",
            EstimatorKind::Mf => "mf",
            EstimatorKind::Amle => "amle",
            EstimatorKind::MleCw => "mle_cw",
        }
    }

    pub fn needs_beta(self) -> bool {
        !matches!(self, EstimatorKind::Iid)
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "iid" => EstimatorKind::Iid,
            "mf" => EstimatorKind::Mf,
            "amle" => EstimatorKind::Amle,
            "mle" | "mle_cw" => EstimatorKind::MleCw,
            other => return Err(Error::Usage(format!("unknown estimator `{other}`"))),
        })
    }
}

/// Stopping rule shared by the fixed-point and quasi-Newton solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Record the objective after every iteration in [`EstimateResult::trace`].
    pub record_trace: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 100_000, record_trace: false }
    }
}

impl FitOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateResult {
    pub estimator: EstimatorKind,
    pub theta_hat: Theta,
    pub u_hat: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Norm of the analytic objective gradient at the returned point.
    #[serde(rename = "grad_norm")]
    pub final_grad_norm: f64,
    #[serde(rename = "objective")]
    pub objective_value: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<f64>,
}

/// Fits `kind` on `x`. A precomputed `θ̂ⁱⁱᵈ` is reused as the starting point for MF and aMLE.
pub fn fit(
    kind: EstimatorKind,
    x: &Observations,
    beta: Option<f64>,
    iid: Option<&Theta>,
    opts: &FitOptions,
) -> Result<EstimateResult> {
    let need = || beta.ok_or_else(|| Error::Usage(format!("estimator `{}` needs beta", kind.name())));
    let iid_fit = |x: &Observations| -> Result<Theta> {
        match iid {
            Some(t) => Ok(t.clone()),
            None => Ok(em_iid(x, &default_init(x), &FitOptions { record_trace: false, ..*opts })?.theta_hat),
        }
    };
    match kind {
        EstimatorKind::Iid => match iid {
            Some(t) => em_iid(x, t, opts),
            None => em_iid(x, &default_init(x), opts),
        },
        EstimatorKind::Mf => {
            let b = need()?;
            em::em_mf_from_iid(x, b, &iid_fit(x)?, opts)
        }
        EstimatorKind::Amle => {
            let b = need()?;
            em::amle_from(x, b, &iid_fit(x)?, opts)
        }
        EstimatorKind::MleCw => exact_mle_cw(x, need()?, opts),
    }
}
