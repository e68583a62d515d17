//! Reproducible Monte Carlo studies and their file outputs.
//!
//! Replication `r` at grid position `b` draws from `substream(seed, (b << 32) | r)` and
//! results are collected in index order, so aggregates do not depend on the worker count.

mod config;
mod lan;
mod monte_carlo;
pub mod persist;
mod sweep;

pub use config::{ExperimentConfig, LabelModel};
pub use lan::{run_lan_diagnostic, LanReport, LanRow, LanSample};
pub use monte_carlo::{
    replication_stream, run_monte_carlo, theory_covariance, EstimatorSummary, RunSummary, FAILURE_FLAG_RATE,
};
pub use persist::Metadata;
pub use sweep::{run_variance_sweep, SweepRow, SweepTable};

use rand::Rng;
use rayon::prelude::*;

use crate::coupling::CouplingMatrix;
use crate::error::{Error, Result};
use crate::labels::{default_burn_in, sample_glauber, CwSampler, LabelVector};

/// Maps `f` over `0..count` on a pool of `workers` threads and returns results in index order.
pub(crate) fn par_indexed<T, F>(workers: Option<usize>, count: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::Usage(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| (0..count).into_par_iter().map(f).collect()))
}

/// Label sampler for one grid point.
pub(crate) enum LabelSource<'a> {
    Cw(CwSampler),
    Glauber { coupling: &'a CouplingMatrix, beta: f64, sweeps: usize },
}

impl<'a> LabelSource<'a> {
    pub(crate) fn new(cfg: &ExperimentConfig, coupling: Option<&'a CouplingMatrix>, beta: f64) -> Result<Self> {
        match (&cfg.labels, coupling) {
            (LabelModel::Cw, _) => Ok(Self::Cw(CwSampler::new(cfg.n, beta)?)),
            (LabelModel::Ising { burn_in, .. }, Some(a)) => Ok(Self::Glauber {
                coupling: a,
                beta,
                sweeps: burn_in.unwrap_or_else(|| default_burn_in(cfg.n)),
            }),
            (LabelModel::Ising { .. }, None) => Err(Error::Usage("ising labels need a coupling matrix".into())),
        }
    }

    pub(crate) fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<LabelVector> {
        match self {
            Self::Cw(s) => Ok(s.sample(rng)),
            Self::Glauber { coupling, beta, sweeps } => sample_glauber(coupling, *beta, *sweeps, rng),
        }
    }
}
