use std::time::Instant;

use log::{debug, warn};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::config::{ExperimentConfig, LabelModel};
use super::persist::{fmt_f64, Metadata};
use super::{par_indexed, LabelSource};
use crate::error::{Error, Result};
use crate::estimators::{fit, EstimatorKind, FitOptions};
use crate::gmm::{generate, Theta};
use crate::rng::substream;
use crate::theory::{info_report, invert, mat_rows, InfoReport};

/// Share of failed replications above which a row is flagged.
pub const FAILURE_FLAG_RATE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorSummary {
    pub beta: f64,
    pub estimator: EstimatorKind,
    pub successes: usize,
    pub failures: usize,
    pub flagged: bool,
    /// Mean of `θ̂` over successful replications.
    pub mean: Vec<f64>,
    /// Sample covariance of `√n(θ̂ - θ₀)`.
    pub cov: Vec<Vec<f64>>,
    /// Limiting covariance from the theory module; `None` when it does not exist (aMLE at `β = 1`).
    pub theory_cov: Option<Vec<Vec<f64>>>,
    /// Share of replications whose 95% Wald ellipsoid built from `theory_cov` contains `θ₀`.
    pub coverage: Option<f64>,
}

impl EstimatorSummary {
    pub fn cov_matrix(&self) -> DMatrix<f64> {
        let d = self.cov.len();
        DMatrix::from_fn(d, d, |i, j| self.cov[i][j])
    }

    /// Diagonal ratio `cov_ii / theory_cov_ii`.
    pub fn variance_ratio(&self) -> Option<Vec<f64>> {
        let t = self.theory_cov.as_ref()?;
        Some((0..t.len()).map(|i| self.cov[i][i] / t[i][i]).collect())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub n: usize,
    pub d: usize,
    pub replications: usize,
    pub theta0: Theta,
    pub labels: LabelModel,
    pub rows: Vec<EstimatorSummary>,
    /// Written as the envelope's metadata block rather than inside the result.
    #[serde(skip)]
    pub metadata: Metadata,
}

impl RunSummary {
    pub fn row(&self, beta: f64, kind: EstimatorKind) -> Option<&EstimatorSummary> {
        self.rows.iter().find(|r| r.beta == beta && r.estimator == kind)
    }

    /// One line per `(β, estimator)`: `beta,estimator,successes,failures,flagged,mean_<i>,
    /// cov_<ij>,theory_cov_<ij>,coverage` with 1-based indices.
    pub fn to_csv_string(&self) -> String {
        let d = self.d;
        let mut out = self.metadata.csv_comment();
        let mut head = vec!["beta".to_string(), "estimator".into(), "successes".into(), "failures".into(), "flagged".into()];
        head.extend((1..=d).map(|i| format!("mean_{i}")));
        for prefix in ["cov", "theory_cov"] {
            for i in 1..=d {
                head.extend((1..=d).map(|j| format!("{prefix}_{i}{j}")));
            }
        }
        head.push("coverage".into());
        out.push_str(&head.join(","));
        out.push('\n');
        for r in &self.rows {
            let mut f = vec![
                fmt_f64(r.beta),
                r.estimator.name().to_string(),
                r.successes.to_string(),
                r.failures.to_string(),
                r.flagged.to_string(),
            ];
            f.extend(r.mean.iter().map(|v| fmt_f64(*v)));
            f.extend(r.cov.iter().flatten().map(|v| fmt_f64(*v)));
            match &r.theory_cov {
                Some(t) => f.extend(t.iter().flatten().map(|v| fmt_f64(*v))),
                None => f.extend(std::iter::repeat_n(fmt_f64(f64::NAN), d * d)),
            }
            f.push(fmt_f64(r.coverage.unwrap_or(f64::NAN)));
            out.push_str(&f.join(","));
            out.push('\n');
        }
        out
    }
}

/// Theoretical limiting covariance of `√n(θ̂ - θ₀)` for each estimator.
pub fn theory_covariance(report: &InfoReport, kind: EstimatorKind) -> Result<Option<DMatrix<f64>>> {
    Ok(match kind {
        EstimatorKind::Iid => Some(report.inv_i0()?),
        EstimatorKind::Mf | EstimatorKind::MleCw => Some(report.inv_i_beta()?),
        EstimatorKind::Amle => report.amle_var.clone(),
    })
}

/// Substream index of replication `r` at grid position `beta_idx`.
pub fn replication_stream(beta_idx: usize, r: usize) -> u64 {
    ((beta_idx as u64) << 32) | r as u64
}

pub fn run_monte_carlo(cfg: &ExperimentConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let start = Instant::now();
    let theta0 = cfg.theta()?;
    let d = cfg.d();
    let opts = FitOptions::with_tol(cfg.tol.unwrap_or(1e-10));
    let coupling = cfg.coupling()?;
    let chi2 = ChiSquared::new(d as f64).map_err(|e| Error::Numerical(e.to_string()))?.inverse_cdf(0.95);
    let mut rows = Vec::new();

    for (bi, &beta) in cfg.betas.iter().enumerate() {
        let source = LabelSource::new(cfg, coupling.as_ref(), beta)?;
        let report = info_report(&theta0, beta)?;
        let fits: Vec<Vec<Option<Vec<f64>>>> = par_indexed(cfg.workers, cfg.replications, |r| {
            let mut rng = substream(cfg.seed, replication_stream(bi, r));
            let z = match source.sample(&mut rng) {
                Ok(z) => z,
                Err(e) => {
                    warn!("beta {beta} replication {r}: label sampling failed: {e}");
                    return vec![None; cfg.estimators.len()];
                }
            };
            let x = generate(&theta0, &z, &mut rng).x;
            let iid = fit(EstimatorKind::Iid, &x, Some(beta), None, &opts).ok().filter(|f| f.converged);
            cfg.estimators
                .iter()
                .map(|&kind| {
                    let res = match (kind, &iid) {
                        (EstimatorKind::Iid, _) => iid.clone().ok_or_else(|| Error::Numerical("iid EM did not converge".into())),
                        (_, Some(i)) => fit(kind, &x, Some(beta), Some(&i.theta_hat), &opts),
                        (_, None) => fit(kind, &x, Some(beta), None, &opts),
                    };
                    match res {
                        Ok(f) if f.converged => Some(f.theta_hat.into_vec()),
                        Ok(f) => {
                            debug!("beta {beta} replication {r}: {} stopped after {} iterations", kind.name(), f.iterations);
                            None
                        }
                        Err(e) => {
                            debug!("beta {beta} replication {r}: {} failed: {e}", kind.name());
                            None
                        }
                    }
                })
                .collect()
        })?;

        for (k, &kind) in cfg.estimators.iter().enumerate() {
            let ok: Vec<&Vec<f64>> = fits.iter().filter_map(|f| f[k].as_ref()).collect();
            let theory = theory_covariance(&report, kind)?;
            let row = summarise(beta, kind, &ok, cfg.replications, &theta0, cfg.n, theory.as_ref(), chi2)?;
            if row.flagged {
                warn!("beta {beta} {}: {} of {} replications failed", kind.name(), row.failures, cfg.replications);
            }
            rows.push(row);
        }
    }

    let mut metadata = Metadata::new(cfg.seed, cfg.hash());
    metadata.wall_time_secs = Some(start.elapsed().as_secs_f64());
    Ok(RunSummary {
        n: cfg.n,
        d,
        replications: cfg.replications,
        theta0,
        labels: cfg.labels.clone(),
        rows,
        metadata,
    })
}

#[allow(clippy::too_many_arguments)]
fn summarise(
    beta: f64,
    kind: EstimatorKind,
    ok: &[&Vec<f64>],
    replications: usize,
    theta0: &Theta,
    n: usize,
    theory: Option<&DMatrix<f64>>,
    chi2: f64,
) -> Result<EstimatorSummary> {
    let d = theta0.dim();
    let t0 = DVector::from_column_slice(theta0.as_slice());
    let rn = (n as f64).sqrt();
    let k = ok.len();
    let failures = replications - k;
    let mut mean = DVector::zeros(d);
    for th in ok {
        mean += DVector::from_column_slice(th);
    }
    mean /= k.max(1) as f64;
    let mut cov = DMatrix::zeros(d, d);
    let scaled_mean = (&mean - &t0) * rn;
    for th in ok {
        let e = (DVector::from_column_slice(th) - &t0) * rn - &scaled_mean;
        cov += &e * e.transpose();
    }
    if k >= 2 {
        cov /= (k - 1) as f64;
    } else {
        cov.fill(f64::NAN);
    }
    if k == 0 {
        mean.fill(f64::NAN);
    }
    let coverage = match theory {
        Some(v) if k > 0 => {
            let vinv = invert(v, "theoretical covariance")?;
            let hits = ok
                .iter()
                .filter(|th| {
                    let e = (DVector::from_column_slice(th) - &t0) * rn;
                    (e.transpose() * &vinv * &e)[(0, 0)] <= chi2
                })
                .count();
            Some(hits as f64 / k as f64)
        }
        _ => None,
    };
    Ok(EstimatorSummary {
        beta,
        estimator: kind,
        successes: k,
        failures,
        flagged: failures as f64 > FAILURE_FLAG_RATE * replications as f64,
        mean: mean.iter().copied().collect(),
        cov: mat_rows(&cov),
        theory_cov: theory.map(mat_rows),
        coverage,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    fn cfg(json: &str) -> ExperimentConfig {
        ExperimentConfig::from_json_str(json, Path::new("mem")).unwrap()
    }

    #[test]
    fn small_run_is_deterministic_and_worker_independent() {
        let mut c = cfg(
            r#"{"seed": 11, "n": 300, "replications": 24, "theta0": [1.0, 0.3], "betas": [0.0, 1.5],
                "estimators": ["iid", "mf", "amle"], "workers": 1}"#,
        );
        let a = run_monte_carlo(&c).unwrap();
        let b = run_monte_carlo(&c).unwrap();
        assert_eq!(a.rows, b.rows);
        c.workers = Some(3);
        let w = run_monte_carlo(&c).unwrap();
        assert_eq!(a.rows, w.rows);
        assert_eq!(a.rows.len(), 6);
    }

    #[test]
    fn summary_invariants() {
        let c = cfg(
            r#"{"seed": 5, "n": 200, "replications": 40, "theta0": [1.0, -0.5], "betas": [0.5, 1.5],
                "estimators": ["iid", "mf"]}"#,
        );
        let s = run_monte_carlo(&c).unwrap();
        for r in &s.rows {
            let m = r.cov_matrix();
            assert!((m[(0, 1)] - m[(1, 0)]).abs() < 1e-12);
            let eig = m.symmetric_eigen().eigenvalues;
            assert!(eig.iter().all(|e| *e >= -1e-10));
            let cv = r.coverage.unwrap();
            assert!((0.0..=1.0).contains(&cv));
            assert_eq!(r.successes + r.failures, 40);
        }
    }

    #[test]
    fn summarise_by_hand() {
        let theta0 = Theta::new(vec![1.0]).unwrap();
        let a = vec![1.1];
        let b = vec![0.8];
        let c = vec![1.0];
        let v = DMatrix::from_element(1, 1, 1.0);
        // n = 100: scaled errors 1, -2, 0; mean -1/3, sample variance 7/3
        let s = summarise(0.0, EstimatorKind::Iid, &[&a, &b, &c], 4, &theta0, 100, Some(&v), 3.841458820694124).unwrap();
        assert!((s.mean[0] - 29.0 / 30.0).abs() < 1e-12);
        assert!((s.cov[0][0] - 7.0 / 3.0).abs() < 1e-12);
        assert_eq!(s.failures, 1);
        assert!(s.flagged);
        // |−2| > 1.96 misses
        assert!((s.coverage.unwrap() - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn csv_header_and_shape() {
        let c = cfg(r#"{"seed": 1, "n": 100, "replications": 5, "theta0": [1.0, 0.0], "betas": [1.0], "estimators": ["iid", "amle"]}"#);
        let s = run_monte_carlo(&c).unwrap();
        let text = s.to_csv_string();
        let lines: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(
            lines[0],
            "beta,estimator,successes,failures,flagged,mean_1,mean_2,cov_11,cov_12,cov_21,cov_22,\
             theory_cov_11,theory_cov_12,theory_cov_21,theory_cov_22,coverage"
        );
        assert_eq!(lines.len(), 3);
        // aMLE has no limiting variance at beta = 1
        assert!(lines[2].ends_with("nan"));
        assert!(s.row(1.0, EstimatorKind::Amle).unwrap().theory_cov.is_none());
    }
}
