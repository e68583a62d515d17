use std::path::Path;

use log::warn;
use serde::Serialize;

use super::config::ExperimentConfig;
use super::persist::{fmt_f64, parse_f64, Metadata};
use crate::error::{Error, Result};
use crate::theory::{info_report, mat_rows};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub beta: f64,
    pub m: f64,
    pub inv_i0: Vec<Vec<f64>>,
    pub inv_i_beta: Vec<Vec<f64>>,
    /// `None` at `β = 1`; written as `nan` in CSV.
    pub amle_var: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub d: usize,
    pub theta0: Vec<f64>,
    pub rows: Vec<SweepRow>,
    #[serde(skip)]
    pub metadata: Metadata,
}

pub fn run_variance_sweep(cfg: &ExperimentConfig) -> Result<SweepTable> {
    cfg.validate()?;
    let theta0 = cfg.theta()?;
    let lo = cfg.betas.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = cfg.betas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo > 0.0 || hi < 2.0 {
        warn!("beta grid [{lo}, {hi}] does not cover [0, 2]");
    }
    let rows = cfg
        .betas
        .iter()
        .map(|&beta| {
            let rep = info_report(&theta0, beta)?;
            Ok(SweepRow {
                beta,
                m: rep.m,
                inv_i0: mat_rows(&rep.inv_i0()?),
                inv_i_beta: mat_rows(&rep.inv_i_beta()?),
                amle_var: rep.amle_var.as_ref().map(mat_rows),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepTable { d: cfg.d(), theta0: theta0.into_vec(), rows, metadata: Metadata::new(cfg.seed, cfg.hash()) })
}

fn header(d: usize) -> Vec<String> {
    let mut h = vec!["beta".to_string(), "m".to_string()];
    for prefix in ["inv_I0", "inv_Ibeta", "amle_var"] {
        for i in 1..=d {
            h.extend((1..=d).map(|j| format!("{prefix}_{i}{j}")));
        }
    }
    h
}

impl SweepTable {
    /// Columns `beta, m, inv_I0_<ij>, inv_Ibeta_<ij>, amle_var_<ij>` (1-based, row-major),
    /// preceded by `# key=value` metadata lines and a `# theta0=` line.
    pub fn to_csv_string(&self) -> String {
        let mut out = self.metadata.csv_comment();
        let t: Vec<String> = self.theta0.iter().map(|v| fmt_f64(*v)).collect();
        out.push_str(&format!("# theta0={}\n", t.join(" ")));
        out.push_str(&header(self.d).join(","));
        out.push('\n');
        let nan = vec![vec![f64::NAN; self.d]; self.d];
        for r in &self.rows {
            let mut f = vec![fmt_f64(r.beta), fmt_f64(r.m)];
            for m in [&r.inv_i0, &r.inv_i_beta, r.amle_var.as_ref().unwrap_or(&nan)] {
                f.extend(m.iter().flatten().map(|v| fmt_f64(*v)));
            }
            out.push_str(&f.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv_str(text: &str, origin: &Path) -> Result<Self> {
        let metadata = Metadata::from_csv_comment(text)
            .ok_or_else(|| Error::parse(origin, "missing metadata comment block"))?;
        let theta0 = text
            .lines()
            .find_map(|l| l.strip_prefix("# theta0="))
            .ok_or_else(|| Error::parse(origin, "missing theta0 comment"))?
            .split_whitespace()
            .map(|s| parse_f64(s).ok_or_else(|| Error::parse(origin, format!("bad theta0 entry `{s}`"))))
            .collect::<Result<Vec<f64>>>()?;
        let d = theta0.len();
        let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
        let head = lines.next().ok_or_else(|| Error::parse(origin, "empty table"))?;
        if head.split(',').map(str::trim).ne(header(d).iter().map(String::as_str)) {
            return Err(Error::parse(origin, format!("unexpected header `{head}`")));
        }
        let dd = d * d;
        let mut rows = Vec::new();
        for (k, line) in lines.enumerate() {
            let v = line
                .split(',')
                .map(|s| parse_f64(s).ok_or_else(|| Error::parse(origin, format!("row {}: bad number `{s}`", k + 1))))
                .collect::<Result<Vec<f64>>>()?;
            if v.len() != 2 + 3 * dd {
                return Err(Error::parse(origin, format!("row {}: expected {} fields", k + 1, 2 + 3 * dd)));
            }
            let mat = |off: usize| (0..d).map(|i| v[off + i * d..off + (i + 1) * d].to_vec()).collect::<Vec<_>>();
            let amle = mat(2 + 2 * dd);
            rows.push(SweepRow {
                beta: v[0],
                m: v[1],
                inv_i0: mat(2),
                inv_i_beta: mat(2 + dd),
                amle_var: (!amle.iter().flatten().all(|x| x.is_nan())).then_some(amle),
            });
        }
        Ok(Self { d, theta0, rows, metadata })
    }
}
