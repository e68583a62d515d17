use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::coupling::CouplingMatrix;
use crate::error::{Error, Result};
use crate::estimators::EstimatorKind;
use crate::gmm::{canonicalize_theta, Theta};

/// Label law used to generate replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum LabelModel {
    /// Exact Curie-Weiss sampler.
    #[default]
    Cw,
    /// Glauber dynamics on a coupling matrix read from a triple CSV.
    Ising {
        coupling: PathBuf,
        #[serde(default)]
        burn_in: Option<usize>,
    },
}

fn default_estimators() -> Vec<EstimatorKind> {
    vec![EstimatorKind::Iid, EstimatorKind::Mf]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub n: usize,
    pub replications: usize,
    pub theta0: Vec<f64>,
    pub betas: Vec<f64>,
    #[serde(default)]
    pub labels: LabelModel,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<EstimatorKind>,
    /// Local direction `h` for the LAN diagnostic; defaults to `(1, 0, …, 0)`.
    #[serde(default)]
    pub h: Option<Vec<f64>>,
    /// Solver tolerance; defaults to `1e-10`.
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Worker threads; `None` uses every available core.
    #[serde(default)]
    pub workers: Option<usize>,
}

impl ExperimentConfig {
    pub fn from_json_str(text: &str, origin: &Path) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::parse(origin, e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text, path)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Usage("replications must be >= 1".into()));
        }
        if self.n == 0 {
            return Err(Error::Usage("n must be >= 1".into()));
        }
        if self.betas.is_empty() {
            return Err(Error::Usage("beta grid is empty".into()));
        }
        if let Some(b) = self.betas.iter().find(|b| !(**b >= 0.0) || !b.is_finite()) {
            return Err(Error::Domain(format!("beta {b} must be finite and >= 0")));
        }
        self.theta()?;
        if let Some(h) = &self.h {
            if h.len() != self.theta0.len() {
                return Err(Error::Usage("h must have the same dimension as theta0".into()));
            }
        }
        if let Some(tol) = self.tol {
            if !(tol > 0.0) {
                return Err(Error::Usage("tol must be positive".into()));
            }
        }
        if matches!(self.labels, LabelModel::Ising { .. }) && self.estimators.contains(&EstimatorKind::MleCw) {
            return Err(Error::Usage("mle_cw requires Curie-Weiss labels".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Usage("workers must be >= 1".into()));
        }
        Ok(())
    }

    pub fn theta(&self) -> Result<Theta> {
        canonicalize_theta(&self.theta0)
    }

    pub fn d(&self) -> usize {
        self.theta0.len()
    }

    pub fn direction(&self) -> Vec<f64> {
        self.h.clone().unwrap_or_else(|| {
            let mut e = vec![0.0; self.d()];
            e[0] = 1.0;
            e
        })
    }

    /// Loads the coupling for Glauber labels and checks its size against `n`.
    pub fn coupling(&self) -> Result<Option<CouplingMatrix>> {
        match &self.labels {
            LabelModel::Cw => Ok(None),
            LabelModel::Ising { coupling, .. } => {
                let a = CouplingMatrix::read_csv(coupling)?;
                if a.n() != self.n {
                    return Err(Error::Usage(format!("coupling has n = {}, config has n = {}", a.n(), self.n)));
                }
                Ok(Some(a))
            }
        }
    }

    /// Hex SHA-256 of the canonical JSON serialisation.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serialises");
        hex::encode(Sha256::digest(&bytes))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> ExperimentConfig {
        ExperimentConfig::from_json_str(
            r#"{"seed": 7, "n": 100, "replications": 4, "theta0": [1.0], "betas": [0.0, 1.5]}"#,
            Path::new("mem"),
        )
        .unwrap()
    }

    #[test]
    fn defaults_fill_in() {
        let c = base();
        assert_eq!(c.labels, LabelModel::Cw);
        assert_eq!(c.estimators, vec![EstimatorKind::Iid, EstimatorKind::Mf]);
        assert_eq!(c.direction(), vec![1.0]);
    }

    #[test]
    fn hash_tracks_every_field() {
        let c = base();
        let h = c.hash();
        assert_eq!(h, base().hash());
        let mut d = c.clone();
        d.seed = 8;
        assert_ne!(d.hash(), h);
        let mut d = c.clone();
        d.betas.push(2.0);
        assert_ne!(d.hash(), h);
        let mut d = c.clone();
        d.estimators.push(EstimatorKind::Amle);
        assert_ne!(d.hash(), h);
        let mut d = c;
        d.workers = Some(2);
        assert_ne!(d.hash(), h);
    }

    #[test]
    fn validation_errors() {
        let bad = [
            r#"{"seed": 1, "n": 10, "replications": 0, "theta0": [1.0], "betas": [0.5]}"#,
            r#"{"seed": 1, "n": 10, "replications": 2, "theta0": [0.0], "betas": [0.5]}"#,
            r#"{"seed": 1, "n": 10, "replications": 2, "theta0": [1.0], "betas": [-0.5]}"#,
            r#"{"seed": 1, "n": 10, "replications": 2, "theta0": [1.0], "betas": [0.5], "bogus": 1}"#,
        ];
        for b in bad {
            assert!(ExperimentConfig::from_json_str(b, Path::new("mem")).is_err(), "{b}");
        }
    }

    #[test]
    fn ising_labels_parse() {
        let c = ExperimentConfig::from_json_str(
            r#"{"seed": 1, "n": 10, "replications": 2, "theta0": [1.0], "betas": [0.5],
                "labels": {"model": "ising", "coupling": "a.csv", "burn_in": 300}}"#,
            Path::new("mem"),
        )
        .unwrap();
        assert_eq!(
            c.labels,
            LabelModel::Ising { coupling: PathBuf::from("a.csv"), burn_in: Some(300) }
        );
    }
}
