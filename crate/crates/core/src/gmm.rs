//! Canonical parameters and data for the symmetric two-component mixture
//! `X_i = θ₀ Z_i + ε_i`, `ε_i ~ N(0, I_d)`.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::LabelVector;

/// Which half of `ℝ^d` a vector lies in, split by the sign of its first nonzero coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HalfSpace {
    Theta1,
    Theta2,
    BoundaryZero,
}

impl HalfSpace {
    /// `+1` for `Θ₁` (and the zero boundary, which downstream code treats as `Θ₁`), `-1` for `Θ₂`.
    pub fn sign(self) -> f64 {
        match self {
            HalfSpace::Theta2 => -1.0,
            _ => 1.0,
        }
    }
}

pub fn halfspace_side(v: &[f64]) -> HalfSpace {
    match v.iter().find(|&&c| c != 0.0) {
        None => HalfSpace::BoundaryZero,
        Some(&c) if c > 0.0 => HalfSpace::Theta1,
        Some(_) => HalfSpace::Theta2,
    }
}

/// Nonzero mean vector in the identifiable half-space `Θ₁`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Theta(Vec<f64>);

impl Theta {
    /// Accepts `v` only if it already lies in `Θ₁`.
    pub fn new(v: Vec<f64>) -> Result<Self> {
        if v.iter().any(|c| !c.is_finite()) {
            return Err(Error::Domain("theta has a non-finite coordinate".into()));
        }
        match halfspace_side(&v) {
            HalfSpace::Theta1 => Ok(Theta(v)),
            HalfSpace::Theta2 => Err(Error::Domain("theta is not in the canonical half-space".into())),
            HalfSpace::BoundaryZero => Err(Error::Domain("theta must be nonzero".into())),
        }
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        crate::numeric::norm(&self.0)
    }
}

impl<'de> Deserialize<'de> for Theta {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        canonicalize_theta(&v).map_err(serde::de::Error::custom)
    }
}

/// Returns `v` or `-v`, whichever lies in `Θ₁`.
pub fn canonicalize_theta(v: &[f64]) -> Result<Theta> {
    match halfspace_side(v) {
        HalfSpace::BoundaryZero => Err(Error::Domain("cannot canonicalize the zero vector".into())),
        HalfSpace::Theta1 => Theta::new(v.to_vec()),
        HalfSpace::Theta2 => Theta::new(v.iter().map(|c| -c).collect()),
    }
}

/// Observation matrix `n × d` (row-major) with its cached column mean.
///
/// Estimators only ever see this type, so ground-truth labels cannot leak into inference.
#[derive(Debug, Clone, PartialEq)]
pub struct Observations {
    n: usize,
    d: usize,
    data: Vec<f64>,
    xbar: Vec<f64>,
}

impl Observations {
    pub fn new(n: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::InvalidSize(format!("observations need n, d >= 1 (got {n} x {d})")));
        }
        if data.len() != n * d {
            return Err(Error::InvalidSize(format!(
                "expected {} values for {n} x {d}, got {}",
                n * d,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("observations contain a non-finite value".into()));
        }
        let mut xbar = vec![0.0; d];
        for row in data.chunks_exact(d) {
            for (m, v) in xbar.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in &mut xbar {
            *m /= n as f64;
        }
        Ok(Self { n, d, data, xbar })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidSize("ragged observation rows".into()));
        }
        Self::new(rows.len(), d, rows.concat())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.d)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn xbar(&self) -> &[f64] {
        &self.xbar
    }

    /// Projections `c_i = θᵀX_i`.
    pub fn project(&self, theta: &[f64]) -> Vec<f64> {
        self.rows().map(|r| crate::numeric::dot(theta, r)).collect()
    }

    /// `(1/n) Σ_i w_i X_i`.
    pub fn weighted_mean(&self, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.d];
        for (row, wi) in self.rows().zip(w) {
            for (o, x) in out.iter_mut().zip(row) {
                *o += wi * x;
            }
        }
        for o in &mut out {
            *o /= self.n as f64;
        }
        out
    }

    /// Rows multiplied by `±1` per `signs`.
    pub fn flip_rows(&self, signs: &[bool]) -> Self {
        let mut data = self.data.clone();
        for (row, &flip) in data.chunks_exact_mut(self.d).zip(signs) {
            if flip {
                row.iter_mut().for_each(|v| *v = -*v);
            }
        }
        Self::new(self.n, self.d, data).expect("flipping preserves validity")
    }

    pub fn negate(&self) -> Self {
        self.flip_rows(&vec![true; self.n])
    }
}

/// Observations with optional ground-truth labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Observations,
    pub z: Option<LabelVector>,
}

impl Dataset {
    pub fn new(x: Observations, z: Option<LabelVector>) -> Result<Self> {
        if let Some(z) = &z {
            if z.len() != x.n() {
                return Err(Error::InvalidSize(format!(
                    "{} labels for {} observations",
                    z.len(),
                    x.n()
                )));
            }
        }
        Ok(Self { x, z })
    }

    pub fn to_csv_string(&self) -> String {
        let d = self.x.d();
        let mut s = String::new();
        let mut header: Vec<String> = (1..=d).map(|j| format!("x{j}")).collect();
        if self.z.is_some() {
            header.push("z".into());
        }
        s.push_str(&header.join(","));
        s.push('\n');
        for (i, row) in self.x.rows().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    s.push(',');
                }
                write!(s, "{v:.16e}").unwrap();
            }
            if let Some(z) = &self.z {
                write!(s, ",{}", z.values()[i]).unwrap();
            }
            s.push('\n');
        }
        s
    }

    pub fn from_csv_str(text: &str, origin: &Path) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or_else(|| Error::parse(origin, "empty dataset file"))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        let has_z = cols.last() == Some(&"z");
        let d = cols.len() - has_z as usize;
        if d == 0 {
            return Err(Error::parse(origin, "no x columns"));
        }
        for (j, c) in cols[..d].iter().enumerate() {
            if *c != format!("x{}", j + 1) {
                return Err(Error::parse(origin, format!("unexpected column `{c}`, want x{}", j + 1)));
            }
        }
        let mut data = Vec::new();
        let mut z = Vec::new();
        let mut n = 0;
        for (k, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != cols.len() {
                return Err(Error::parse(origin, format!("row {} has {} fields", k + 1, fields.len())));
            }
            for f in &fields[..d] {
                let v: f64 = f
                    .parse()
                    .map_err(|_| Error::parse(origin, format!("row {}: `{f}` is not a number", k + 1)))?;
                data.push(v);
            }
            if has_z {
                let v: i8 = fields[d]
                    .parse()
                    .map_err(|_| Error::parse(origin, format!("row {}: bad label", k + 1)))?;
                z.push(v);
            }
            n += 1;
        }
        let x = Observations::new(n, d, data).map_err(|e| Error::parse(origin, e.to_string()))?;
        let z = if has_z {
            Some(LabelVector::new(z).map_err(|e| Error::parse(origin, e.to_string()))?)
        } else {
            None
        };
        Self::new(x, z)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_str(&text, path)
    }
}

/// Draws `X_i = θ₀ z_i + ε_i`.
pub fn generate<R: Rng + ?Sized>(theta0: &Theta, z: &LabelVector, rng: &mut R) -> Dataset {
    let d = theta0.dim();
    let n = z.len();
    let mut data = Vec::with_capacity(n * d);
    for &zi in z.values() {
        for &t in theta0.as_slice() {
            let e: f64 = rng.sample(StandardNormal);
            data.push(t * zi as f64 + e);
        }
    }
    let x = Observations::new(n, d, data).expect("generated data is finite");
    Dataset { x, z: Some(z.clone()) }
}
