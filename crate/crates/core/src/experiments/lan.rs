use serde::Serialize;

use super::config::{ExperimentConfig, LabelModel};
use super::persist::{fmt_f64, Metadata};
use super::{par_indexed, replication_stream};
use crate::error::{Error, Result};
use crate::estimators::{logz_cw, score_iid, score_lowtemp};
use crate::gmm::{generate, Theta};
use crate::labels::CwSampler;
use crate::numeric::dot;
use crate::rng::substream;
use crate::theory::info_report;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LanSample {
    /// Exact `log dP_{θₙ}/dP_{θ₀}`.
    pub llr: f64,
    /// `hᵀΔ`.
    pub score_term: f64,
    /// `hᵀΔ - ½hᵀIh`.
    pub prediction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LanRow {
    pub beta: f64,
    /// `hᵀIh` with `I = I₀` for `β ≤ 1` and `I_β` otherwise.
    pub info_h: f64,
    pub mean_llr: f64,
    pub var_llr: f64,
    pub se_llr: f64,
    pub mean_pred_err: f64,
    pub var_pred_err: f64,
    /// Least-squares slope of the LLR on `hᵀΔ`.
    pub slope: f64,
    #[serde(skip)]
    pub samples: Vec<LanSample>,
}

impl LanRow {
    /// `|mean_llr + ½hᵀIh|` in units of the Monte Carlo standard error.
    pub fn mean_z(&self) -> f64 {
        (self.mean_llr + 0.5 * self.info_h).abs() / self.se_llr
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LanReport {
    pub n: usize,
    pub replications: usize,
    pub theta0: Theta,
    pub h: Vec<f64>,
    pub rows: Vec<LanRow>,
    #[serde(skip)]
    pub metadata: Metadata,
}

impl LanReport {
    /// Per-replication `beta,replication,llr,score_term,prediction`.
    pub fn samples_csv_string(&self) -> String {
        let mut out = self.metadata.csv_comment();
        out.push_str("beta,replication,llr,score_term,prediction\n");
        for row in &self.rows {
            for (r, s) in row.samples.iter().enumerate() {
                out.push_str(&format!(
                    "{},{r},{},{},{}\n",
                    fmt_f64(row.beta),
                    fmt_f64(s.llr),
                    fmt_f64(s.score_term),
                    fmt_f64(s.prediction)
                ));
            }
        }
        out
    }
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let k = v.len() as f64;
    let m = v.iter().sum::<f64>() / k;
    let s = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>();
    (m, if v.len() > 1 { s / (k - 1.0) } else { f64::NAN })
}

pub fn run_lan_diagnostic(cfg: &ExperimentConfig, h: &[f64]) -> Result<LanReport> {
    cfg.validate()?;
    if cfg.labels != LabelModel::Cw {
        return Err(Error::Usage("the LAN diagnostic needs Curie-Weiss labels".into()));
    }
    if h.len() != cfg.d() {
        return Err(Error::Usage(format!("h has dimension {}, theta0 has {}", h.len(), cfg.d())));
    }
    let theta0 = cfg.theta()?;
    let t0 = theta0.as_slice();
    let n = cfg.n as f64;
    let rn = n.sqrt();
    let theta_n: Vec<f64> = t0.iter().zip(h).map(|(t, hi)| t + hi / rn).collect();
    let shift = -(2.0 * rn * dot(h, t0) + dot(h, h)) / 2.0;
    let mut rows = Vec::new();

    for (bi, &beta) in cfg.betas.iter().enumerate() {
        let sampler = CwSampler::new(cfg.n, beta)?;
        let rep = info_report(&theta0, beta)?;
        let info = if beta <= 1.0 { &rep.i0 } else { &rep.i_beta };
        let hv = nalgebra::DVector::from_column_slice(h);
        let info_h = (hv.transpose() * info * &hv)[(0, 0)];
        let samples = par_indexed(cfg.workers, cfg.replications, |r| -> Result<LanSample> {
            let mut rng = substream(cfg.seed, replication_stream(bi, r));
            let z = sampler.sample(&mut rng);
            let x = generate(&theta0, &z, &mut rng).x;
            let llr = if h.iter().all(|v| *v == 0.0) {
                0.0
            } else {
                shift + n * (logz_cw(&x, beta, &theta_n)? - logz_cw(&x, beta, t0)?)
            };
            let delta = if beta <= 1.0 { score_iid(&x, &theta0)? } else { score_lowtemp(&x, &theta0, beta)? };
            let score_term = dot(h, &delta.delta);
            Ok(LanSample { llr, score_term, prediction: score_term - 0.5 * info_h })
        })?
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

        let llr: Vec<f64> = samples.iter().map(|s| s.llr).collect();
        let err: Vec<f64> = samples.iter().map(|s| s.llr - s.prediction).collect();
        let sc: Vec<f64> = samples.iter().map(|s| s.score_term).collect();
        let (mean_llr, var_llr) = mean_var(&llr);
        let (mean_pred_err, var_pred_err) = mean_var(&err);
        let (ms, vs) = mean_var(&sc);
        let cov = llr.iter().zip(&sc).map(|(a, b)| (a - mean_llr) * (b - ms)).sum::<f64>() / (llr.len() as f64 - 1.0);
        rows.push(LanRow {
            beta,
            info_h,
            mean_llr,
            var_llr,
            se_llr: (var_llr / llr.len() as f64).sqrt(),
            mean_pred_err,
            var_pred_err,
            slope: cov / vs,
            samples,
        });
    }

    Ok(LanReport {
        n: cfg.n,
        replications: cfg.replications,
        theta0,
        h: h.to_vec(),
        rows,
        metadata: Metadata::new(cfg.seed, cfg.hash()),
    })
}
