//! Mixture expectations and the information / sandwich objects built from them.
//!
//! Every integrand depends on `X` only through `S = θ₀ᵀX` and at most quadratic
//! factors of `X`. Writing `t = ‖θ₀‖`, `e = θ₀/t` and `G = eᵀX ~ N(zt, 1)` given the
//! component `z`, we have `E[X g(S)] = e E[G g]` and
//! `E[XXᵀ g(S)] = eeᵀ E[G² g] + (I - eeᵀ) E[g]`, so one-dimensional Gauss–Hermite suffices.

use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::ser::SerializeSeq;
use serde::{Serialize, Serializer};

use super::quadrature::{default_rule, NormalRule};
use super::{c_beta, solve_m};
use crate::error::{Error, Result};
use crate::gmm::Theta;
use crate::numeric::sech2;

/// One-dimensional moments of `τ = tanh(βm + tG)` and `sech²(βm + tG)` within one component.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct ComponentMoments {
    pub tanh: f64,
    pub g_tanh: f64,
    pub tanh2: f64,
    pub g_tanh2: f64,
    pub g2_tanh2: f64,
    pub sech2: f64,
    pub g_sech2: f64,
    pub g2_sech2: f64,
}

pub(crate) fn component_moments(rule: &NormalRule, t: f64, shift: f64, z: f64) -> ComponentMoments {
    let mut m = ComponentMoments::default();
    for (x, w) in rule.nodes.iter().zip(&rule.weights) {
        let g = z * t + x;
        let arg = shift + t * g;
        let th = arg.tanh();
        let s2 = sech2(arg);
        let th2 = th * th;
        m.tanh += w * th;
        m.g_tanh += w * g * th;
        m.tanh2 += w * th2;
        m.g_tanh2 += w * g * th2;
        m.g2_tanh2 += w * g * g * th2;
        m.sech2 += w * s2;
        m.g_sech2 += w * g * s2;
        m.g2_sech2 += w * g * g * s2;
    }
    m
}

/// Geometry and per-component moments at `(θ₀, β)` under the mixture with weights `(1 ± m)/2`.
pub(crate) struct MixtureMoments {
    pub d: usize,
    pub e: DVector<f64>,
    pub p: [f64; 2],
    pub comp: [ComponentMoments; 2],
}

impl MixtureMoments {
    pub fn new(rule: &NormalRule, theta0: &Theta, beta: f64, m: f64) -> Self {
        let t = theta0.norm();
        let e = DVector::from_column_slice(theta0.as_slice()) / t;
        let shift = beta * m;
        Self {
            d: theta0.dim(),
            e,
            p: [(1.0 + m) / 2.0, (1.0 - m) / 2.0],
            comp: [
                component_moments(rule, t, shift, 1.0),
                component_moments(rule, t, shift, -1.0),
            ],
        }
    }

    fn avg(&self, f: impl Fn(&ComponentMoments) -> f64) -> f64 {
        self.p[0] * f(&self.comp[0]) + self.p[1] * f(&self.comp[1])
    }

    /// `eeᵀ a + (I - eeᵀ) b`.
    fn radial(&self, a: f64, b: f64) -> DMatrix<f64> {
        let eet = &self.e * self.e.transpose();
        let id = DMatrix::<f64>::identity(self.d, self.d);
        &eet * a + (id - &eet) * b
    }

    pub fn alpha0(&self) -> f64 {
        self.avg(|c| c.sech2)
    }

    pub fn alpha1(&self) -> DVector<f64> {
        &self.e * self.avg(|c| c.g_sech2)
    }

    pub fn alpha2(&self) -> DMatrix<f64> {
        self.radial(self.avg(|c| c.g2_sech2), self.avg(|c| c.sech2))
    }

    /// `(μ₁, μ₋₁)`.
    pub fn mu(&self) -> (f64, f64) {
        (self.comp[0].tanh, self.comp[1].tanh)
    }

    /// `(ν₁, ν₋₁)`.
    pub fn nu(&self) -> (DVector<f64>, DVector<f64>) {
        (&self.e * self.comp[0].g_tanh, &self.e * self.comp[1].g_tanh)
    }

    /// `E tanh(βm + S)`.
    pub fn mean_tanh(&self) -> f64 {
        self.avg(|c| c.tanh)
    }

    /// `E X tanh(βm + S)`.
    pub fn mean_x_tanh(&self) -> DVector<f64> {
        &self.e * self.avg(|c| c.g_tanh)
    }

    pub fn var_blocks(&self, beta: f64) -> VarBlocks {
        let (nu1, num1) = self.nu();
        let nus = [nu1, num1];
        let mut v11 = 0.0;
        let mut v12 = DVector::zeros(self.d);
        let mut v22 = DMatrix::zeros(self.d, self.d);
        for k in 0..2 {
            let c = &self.comp[k];
            let p = self.p[k];
            v11 += p * beta * beta * (c.tanh2 - c.tanh * c.tanh);
            v12 += (&self.e * c.g_tanh2 - &nus[k] * c.tanh) * (p * beta);
            v22 += (self.radial(c.g2_tanh2, c.tanh2) - &nus[k] * nus[k].transpose()) * p;
        }
        VarBlocks { v11, v12, v22 }
    }
}

/// Within-component variance blocks `E_Z Var((βτ, Xτ) | Z)`, `τ = tanh(βm + θ₀ᵀX)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarBlocks {
    pub v11: f64,
    #[serde(serialize_with = "ser_vec")]
    pub v12: DVector<f64>,
    #[serde(serialize_with = "ser_mat")]
    pub v22: DMatrix<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpectKind {
    /// `α₀ = E sech²(βm + S)`
    Sech2,
    /// `α₁ = E X sech²(βm + S)`
    XSech2,
    /// `α₂ = E XXᵀ sech²(βm + S)`
    XxSech2,
    /// `μ_z = E[tanh(βm + S) | Z = z]`
    TanhZ,
    /// `ν_z = E[X tanh(βm + S) | Z = z]`
    XTanhZ,
    VarBlocks,
}

impl FromStr for ExpectKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "sech2" => ExpectKind::Sech2,
            "x_sech2" => ExpectKind::XSech2,
            "xx_sech2" => ExpectKind::XxSech2,
            "tanh_z" => ExpectKind::TanhZ,
            "x_tanh_z" => ExpectKind::XTanhZ,
            "var_blocks" => ExpectKind::VarBlocks,
            other => return Err(Error::Usage(format!("unknown expectation kind `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expectation {
    Scalar(f64),
    Vector(DVector<f64>),
    Matrix(DMatrix<f64>),
    ScalarPair(f64, f64),
    VectorPair(DVector<f64>, DVector<f64>),
    VarBlocks(VarBlocks),
}

/// Expectation of the requested integrand under the mixture `P_θ₀` at inverse temperature `β`.
pub fn mixture_expect(theta0: &Theta, beta: f64, kind: ExpectKind) -> Result<Expectation> {
    check_beta(beta)?;
    let mm = MixtureMoments::new(default_rule(), theta0, beta, solve_m(beta));
    Ok(match kind {
        ExpectKind::Sech2 => Expectation::Scalar(mm.alpha0()),
        ExpectKind::XSech2 => Expectation::Vector(mm.alpha1()),
        ExpectKind::XxSech2 => Expectation::Matrix(mm.alpha2()),
        ExpectKind::TanhZ => {
            let (a, b) = mm.mu();
            Expectation::ScalarPair(a, b)
        }
        ExpectKind::XTanhZ => {
            let (a, b) = mm.nu();
            Expectation::VectorPair(a, b)
        }
        ExpectKind::VarBlocks => Expectation::VarBlocks(mm.var_blocks(beta)),
    })
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::Domain(format!("beta must be finite and >= 0, got {beta}")));
    }
    Ok(())
}

pub(crate) fn i0_with_rule(rule: &NormalRule, theta0: &Theta) -> DMatrix<f64> {
    let mm = MixtureMoments::new(rule, theta0, 0.0, 0.0);
    DMatrix::identity(mm.d, mm.d) - mm.alpha2()
}

/// `I₀(θ₀) = I - E XXᵀ sech²(θ₀ᵀX)` under the symmetric mixture.
pub fn info_iid(theta0: &Theta) -> DMatrix<f64> {
    i0_with_rule(default_rule(), theta0)
}

/// All limiting-variance objects at `(θ₀, β)`.
#[derive(Debug, Clone, Serialize)]
pub struct InfoReport {
    pub theta0: Theta,
    pub beta: f64,
    pub m: f64,
    #[serde(serialize_with = "ser_mat")]
    pub i0: DMatrix<f64>,
    pub gamma11: f64,
    #[serde(serialize_with = "ser_vec")]
    pub gamma12: DVector<f64>,
    #[serde(serialize_with = "ser_mat")]
    pub gamma22: DMatrix<f64>,
    /// `false` at `β = 1`, where `C(β)` diverges and the `Σ` blocks are omitted.
    pub sigma_available: bool,
    pub sigma11: Option<f64>,
    #[serde(serialize_with = "ser_opt_vec")]
    pub sigma12: Option<DVector<f64>>,
    #[serde(serialize_with = "ser_opt_mat")]
    pub sigma22: Option<DMatrix<f64>>,
    #[serde(serialize_with = "ser_vec")]
    pub delta: DVector<f64>,
    /// Serialised as `null` when infinite.
    pub c_beta: f64,
    #[serde(serialize_with = "ser_mat")]
    pub i_beta: DMatrix<f64>,
    pub alpha0: f64,
    #[serde(serialize_with = "ser_vec")]
    pub alpha1: DVector<f64>,
    #[serde(serialize_with = "ser_mat")]
    pub alpha2: DMatrix<f64>,
    pub mu: (f64, f64),
    #[serde(serialize_with = "ser_vec_pair")]
    pub nu: (DVector<f64>, DVector<f64>),
    #[serde(serialize_with = "ser_opt_mat")]
    pub amle_var: Option<DMatrix<f64>>,
}

impl InfoReport {
    pub fn d(&self) -> usize {
        self.theta0.dim()
    }

    pub fn inv_i0(&self) -> Result<DMatrix<f64>> {
        invert(&self.i0, "I0")
    }

    pub fn inv_i_beta(&self) -> Result<DMatrix<f64>> {
        invert(&self.i_beta, "I_beta")
    }

    /// `Γ` as a `(1+d) × (1+d)` matrix.
    pub fn gamma(&self) -> DMatrix<f64> {
        block(self.gamma11, &self.gamma12, &self.gamma22)
    }

    /// `Σ` as a `(1+d) × (1+d)` matrix when available.
    pub fn sigma(&self) -> Option<DMatrix<f64>> {
        Some(block(self.sigma11?, self.sigma12.as_ref()?, self.sigma22.as_ref()?))
    }
}

fn block(a: f64, b: &DVector<f64>, c: &DMatrix<f64>) -> DMatrix<f64> {
    let d = b.len();
    let mut g = DMatrix::zeros(d + 1, d + 1);
    g[(0, 0)] = a;
    for i in 0..d {
        g[(0, i + 1)] = b[i];
        g[(i + 1, 0)] = b[i];
        for j in 0..d {
            g[(i + 1, j + 1)] = c[(i, j)];
        }
    }
    g
}

pub(crate) fn invert(m: &DMatrix<f64>, name: &str) -> Result<DMatrix<f64>> {
    m.clone()
        .try_inverse()
        .ok_or_else(|| Error::Numerical(format!("{name} is singular")))
}

pub(crate) fn report_with_rule(rule: &NormalRule, theta0: &Theta, beta: f64) -> Result<InfoReport> {
    check_beta(beta)?;
    let d = theta0.dim();
    let m = solve_m(beta);
    let mm = MixtureMoments::new(rule, theta0, beta, m);
    let i0 = i0_with_rule(rule, theta0);

    let alpha0 = mm.alpha0();
    let alpha1 = mm.alpha1();
    let alpha2 = mm.alpha2();
    let gamma11 = beta - beta * beta * alpha0;
    let gamma12 = &alpha1 * (-beta);
    let gamma22 = DMatrix::identity(d, d) - &alpha2;
    let (i_beta, delta) = if beta == 0.0 {
        (gamma22.clone(), DVector::zeros(d))
    } else {
        if !(gamma11 > 0.0) {
            return Err(Error::Numerical(format!("gamma11 = {gamma11} is not positive")));
        }
        (
            &gamma22 - &gamma12 * gamma12.transpose() / gamma11,
            &gamma12 / gamma11,
        )
    };

    let c = c_beta(beta);
    let mu = mm.mu();
    let nu = mm.nu();
    let (sigma11, sigma12, sigma22, amle_var) = if c.is_finite() {
        let vb = mm.var_blocks(beta);
        let dmu = beta * (mu.0 - mu.1);
        let dnu = &nu.0 - &nu.1;
        let s11 = vb.v11 + c / 4.0 * dmu * dmu;
        let s12 = vb.v12 + &dnu * (c / 4.0 * dmu);
        let s22 = vb.v22 + &dnu * dnu.transpose() * (c / 4.0);
        let g22_inv = invert(&gamma22, "gamma22")?;
        let amle = &g22_inv * &s22 * &g22_inv;
        (Some(s11), Some(s12), Some(s22), Some(amle))
    } else {
        (None, None, None, None)
    };

    Ok(InfoReport {
        theta0: theta0.clone(),
        beta,
        m,
        i0,
        gamma11,
        gamma12,
        gamma22,
        sigma_available: sigma11.is_some(),
        sigma11,
        sigma12,
        sigma22,
        delta,
        c_beta: c,
        i_beta,
        alpha0,
        alpha1,
        alpha2,
        mu,
        nu,
        amle_var,
    })
}

pub fn info_report(theta0: &Theta, beta: f64) -> Result<InfoReport> {
    report_with_rule(default_rule(), theta0, beta)
}

fn ser_vec<S: Serializer>(v: &DVector<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter())
}

fn ser_mat<S: Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(m.nrows()))?;
    for i in 0..m.nrows() {
        let row: Vec<f64> = m.row(i).iter().copied().collect();
        seq.serialize_element(&row)?;
    }
    seq.end()
}

fn ser_opt_vec<S: Serializer>(v: &Option<DVector<f64>>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(v) => ser_vec(v, s),
        None => s.serialize_none(),
    }
}

fn ser_opt_mat<S: Serializer>(m: &Option<DMatrix<f64>>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match m {
        Some(m) => ser_mat(m, s),
        None => s.serialize_none(),
    }
}

fn ser_vec_pair<S: Serializer>(
    p: &(DVector<f64>, DVector<f64>),
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    let a: Vec<f64> = p.0.iter().copied().collect();
    let b: Vec<f64> = p.1.iter().copied().collect();
    (a, b).serialize(s)
}

/// Row-major nested representation used by the JSON outputs.
pub(crate) fn mat_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}
