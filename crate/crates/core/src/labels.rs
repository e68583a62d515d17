//! Label samplers: exact Curie-Weiss, Glauber dynamics for general couplings,
//! brute-force enumeration, and the Curie-Weiss random-field posterior.

use std::path::Path;

use rand::Rng;
use statrs::function::gamma::ln_gamma;

use crate::auxfield;
use crate::coupling::CouplingMatrix;
use crate::error::{Error, Result};
use crate::gmm::{Observations, Theta};
use crate::numeric::{dot, log_sum_exp};

/// Spin configuration in `{-1, +1}^n` with its cached magnetisation.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelVector {
    values: Vec<i8>,
    mean: f64,
}

impl LabelVector {
    pub fn new(values: Vec<i8>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidSize("label vector must be non-empty".into()));
        }
        if let Some(bad) = values.iter().find(|&&v| v != 1 && v != -1) {
            return Err(Error::Domain(format!("label {bad} is not ±1")));
        }
        let mean = values.iter().map(|&v| v as f64).sum::<f64>() / values.len() as f64;
        Ok(Self { values, mean })
    }

    pub fn values(&self) -> &[i8] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Magnetisation `z̄`.
    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Bitmask index with bit `i` set iff `z_i = +1`; used by the enumeration tables.
    pub fn config_index(&self) -> usize {
        config_index(&self.values)
    }

    pub fn to_csv_string(&self) -> String {
        let mut s = String::with_capacity(3 * self.values.len() + 2);
        s.push_str("z\n");
        for &v in &self.values {
            s.push_str(if v > 0 { "1\n" } else { "-1\n" });
        }
        s
    }

    /// Reads the format written by [`LabelVector::to_csv_string`]; lines starting with `#` are skipped.
    pub fn from_csv_str(text: &str, origin: &Path) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.starts_with('#'));
        match lines.next().map(str::trim) {
            Some("z") => {}
            other => {
                return Err(Error::parse(
                    origin,
                    format!("expected header `z`, found {:?}", other.unwrap_or("")),
                ))
            }
        }
        let mut values = Vec::new();
        for (k, line) in lines.enumerate() {
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            let v: i8 = t
                .parse()
                .map_err(|_| Error::parse(origin, format!("row {}: `{t}` is not ±1", k + 1)))?;
            values.push(v);
        }
        Self::new(values).map_err(|e| Error::parse(origin, e.to_string()))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_str(&text, path)
    }
}

pub fn config_index(z: &[i8]) -> usize {
    z.iter()
        .enumerate()
        .fold(0usize, |acc, (i, &v)| if v > 0 { acc | (1 << i) } else { acc })
}

pub fn config_from_index(index: usize, n: usize) -> Vec<i8> {
    (0..n).map(|i| if index >> i & 1 == 1 { 1 } else { -1 }).collect()
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::Domain(format!("inverse temperature must be finite and >= 0, got {beta}")));
    }
    Ok(())
}

/// Exact Curie-Weiss sampler.
///
/// The number of positive spins `k` is drawn from the law proportional to
/// `C(n,k) exp(β s²/(2n))`, `s = 2k - n`, computed in log space; the positive spins
/// are then placed uniformly at random.
#[derive(Debug, Clone)]
pub struct CwSampler {
    n: usize,
    beta: f64,
    cdf: Vec<f64>,
}

impl CwSampler {
    pub fn new(n: usize, beta: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidSize("Curie-Weiss sampler needs n >= 1".into()));
        }
        check_beta(beta)?;
        let nf = n as f64;
        let lg_n = ln_gamma(nf + 1.0);
        let logw: Vec<f64> = (0..=n)
            .map(|k| {
                let kf = k as f64;
                let s = 2.0 * kf - nf;
                lg_n - ln_gamma(kf + 1.0) - ln_gamma(nf - kf + 1.0) + beta * s * s / (2.0 * nf)
            })
            .collect();
        let lz = log_sum_exp(&logw);
        let mut acc = 0.0;
        let cdf = logw
            .iter()
            .map(|lw| {
                acc += (lw - lz).exp();
                acc
            })
            .collect();
        Ok(Self { n, beta, cdf })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Probability of exactly `k` positive spins.
    pub fn level_prob(&self, k: usize) -> f64 {
        if k == 0 {
            self.cdf[0]
        } else {
            self.cdf[k] - self.cdf[k - 1]
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> LabelVector {
        let u: f64 = rng.random::<f64>() * self.cdf[self.n];
        let k = self.cdf.partition_point(|&c| c < u).min(self.n);
        let mut values = vec![-1i8; self.n];
        // partial Fisher-Yates: the first k slots of a random permutation become +1
        let mut idx: Vec<usize> = (0..self.n).collect();
        for t in 0..k {
            let j = rng.random_range(t..self.n);
            idx.swap(t, j);
            values[idx[t]] = 1;
        }
        LabelVector { mean: (2.0 * k as f64 - self.n as f64) / self.n as f64, values }
    }
}

pub fn sample_cw<R: Rng + ?Sized>(n: usize, beta: f64, rng: &mut R) -> Result<LabelVector> {
    Ok(CwSampler::new(n, beta)?.sample(rng))
}

/// Default Glauber burn-in in sweeps: `max(200, 20 log2 n)`.
pub fn default_burn_in(n: usize) -> usize {
    let l = (n.max(1) as f64).log2();
    200usize.max((20.0 * l).ceil() as usize)
}

/// Sweeps between retained samples.
pub const DEFAULT_THINNING: usize = 5;

/// Heat-bath Glauber chain with a systematic scan over sites.
#[derive(Debug, Clone)]
pub struct GlauberChain<'a> {
    coupling: &'a CouplingMatrix,
    beta: f64,
    z: Vec<i8>,
    fields: Vec<f64>,
}

impl<'a> GlauberChain<'a> {
    /// Starts from a uniformly random configuration.
    pub fn new<R: Rng + ?Sized>(coupling: &'a CouplingMatrix, beta: f64, rng: &mut R) -> Result<Self> {
        check_beta(beta)?;
        let n = coupling.n();
        let z: Vec<i8> = (0..n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
        let fields = (0..n)
            .map(|i| coupling.row(i).iter().zip(&z).map(|(a, &zj)| a * zj as f64).sum())
            .collect();
        Ok(Self { coupling, beta, z, fields })
    }

    /// One sweep: `n` single-site updates, site `i` resampled with mean `tanh(β Σ_j A(i,j) z_j)`.
    pub fn sweep<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let n = self.z.len();
        for i in 0..n {
            let p_plus = 0.5 * (1.0 + (self.beta * self.fields[i]).tanh());
            let new = if rng.random::<f64>() < p_plus { 1i8 } else { -1i8 };
            if new != self.z[i] {
                let delta = 2.0 * new as f64;
                self.z[i] = new;
                for (f, a) in self.fields.iter_mut().zip(self.coupling.row(i)) {
                    *f += a * delta;
                }
            }
        }
    }

    pub fn run<R: Rng + ?Sized>(&mut self, sweeps: usize, rng: &mut R) {
        for _ in 0..sweeps {
            self.sweep(rng);
        }
    }

    pub fn state(&self) -> &[i8] {
        &self.z
    }

    pub fn labels(&self) -> LabelVector {
        LabelVector::new(self.z.clone()).expect("chain state is a valid spin vector")
    }
}

/// Runs `sweeps` Glauber sweeps from a uniformly random start and returns the final state.
pub fn sample_glauber<R: Rng + ?Sized>(
    coupling: &CouplingMatrix,
    beta: f64,
    sweeps: usize,
    rng: &mut R,
) -> Result<LabelVector> {
    if sweeps == 0 {
        return Err(Error::Usage("glauber sampler needs sweeps >= 1".into()));
    }
    let mut chain = GlauberChain::new(coupling, beta, rng)?;
    chain.run(sweeps, rng);
    Ok(chain.labels())
}

pub const MAX_ENUMERATION_N: usize = 20;

/// Exact pmf `∝ exp((β/2) zᵀAz)` indexed by [`config_index`].
pub fn enumerate_ising_pmf(coupling: &CouplingMatrix, beta: f64) -> Result<Vec<f64>> {
    enumerate_rfim_pmf(coupling, beta, &vec![0.0; coupling.n()])
}

/// Exact pmf `∝ exp((β/2) wᵀAw + Σ c_i w_i)` indexed by [`config_index`].
pub fn enumerate_rfim_pmf(coupling: &CouplingMatrix, beta: f64, fields: &[f64]) -> Result<Vec<f64>> {
    let n = coupling.n();
    if n > MAX_ENUMERATION_N {
        return Err(Error::InvalidSize(format!(
            "enumeration supports n <= {MAX_ENUMERATION_N}, got {n}"
        )));
    }
    check_beta(beta)?;
    if fields.len() != n {
        return Err(Error::InvalidSize("one field per site required".into()));
    }
    let total = 1usize << n;
    let mut logw = vec![0.0; total];
    for (idx, lw) in logw.iter_mut().enumerate() {
        let z = config_from_index(idx, n);
        let lin: f64 = z.iter().zip(fields).map(|(&zi, c)| zi as f64 * c).sum();
        *lw = coupling.energy(beta, &z) + lin;
    }
    let lz = log_sum_exp(&logw);
    Ok(logw.into_iter().map(|lw| (lw - lz).exp()).collect())
}

/// Curie-Weiss random-field Ising model `Q_θ(w) ∝ exp(nβ w̄²/2 + Σ_i c_i w_i)`, `c_i = θᵀX_i`.
#[derive(Debug, Clone)]
pub struct RfimSpec {
    beta: f64,
    theta: Theta,
    fields: Vec<f64>,
}

impl RfimSpec {
    pub fn new(beta: f64, theta: Theta, x: &Observations) -> Result<Self> {
        check_beta(beta)?;
        if theta.dim() != x.d() {
            return Err(Error::InvalidSize(format!(
                "theta has dimension {}, data has {}",
                theta.dim(),
                x.d()
            )));
        }
        let fields = x.rows().map(|r| dot(theta.as_slice(), r)).collect();
        Ok(Self { beta, theta, fields })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn theta(&self) -> &Theta {
        &self.theta
    }

    /// Random fields `c_i = θᵀX_i`.
    pub fn fields(&self) -> &[f64] {
        &self.fields
    }
}

pub const RFIM_GRID_POINTS: usize = 20_001;

/// Draws `W ~ Q_θ` by sampling the auxiliary `Y` on a dense grid (inverse CDF with
/// uniform placement inside a cell) and then independent spins with mean `tanh(βY + c_i)`.
#[derive(Debug, Clone)]
pub struct RfimSampler {
    spec: RfimSpec,
    grid: Vec<f64>,
    cell_cdf: Vec<f64>,
}

impl RfimSampler {
    pub fn new(spec: RfimSpec) -> Result<Self> {
        if spec.beta == 0.0 {
            return Ok(Self { spec, grid: Vec::new(), cell_cdf: Vec::new() });
        }
        let n = spec.fields.len();
        let (lo, hi) = auxfield::window(n, spec.beta);
        let m = RFIM_GRID_POINTS;
        let h = (hi - lo) / (m - 1) as f64;
        let grid: Vec<f64> = (0..m).map(|k| lo + h * k as f64).collect();
        let logd: Vec<f64> = grid
            .iter()
            .map(|&y| auxfield::log_density(spec.beta, &spec.fields, y))
            .collect();
        let max = logd.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::Numerical("auxiliary density underflowed on the whole grid".into()));
        }
        let dens: Vec<f64> = logd.iter().map(|l| (l - max).exp()).collect();
        let mut acc = 0.0;
        let cell_cdf: Vec<f64> = dens
            .windows(2)
            .map(|w| {
                acc += 0.5 * (w[0] + w[1]) * h;
                acc
            })
            .collect();
        if !(acc > 0.0) {
            return Err(Error::Numerical("auxiliary density has zero grid mass".into()));
        }
        Ok(Self { spec, grid, cell_cdf })
    }

    pub fn spec(&self) -> &RfimSpec {
        &self.spec
    }

    /// CDF of the gridded auxiliary law at `y` (piecewise linear between cell edges).
    pub fn aux_cdf(&self, y: f64) -> f64 {
        if self.grid.is_empty() {
            return f64::NAN;
        }
        let total = *self.cell_cdf.last().unwrap();
        if y <= self.grid[0] {
            return 0.0;
        }
        if y >= *self.grid.last().unwrap() {
            return 1.0;
        }
        let h = self.grid[1] - self.grid[0];
        let k = (((y - self.grid[0]) / h).floor() as usize).min(self.cell_cdf.len() - 1);
        let before = if k == 0 { 0.0 } else { self.cell_cdf[k - 1] };
        let frac = (y - self.grid[k]) / h;
        (before + frac * (self.cell_cdf[k] - before)) / total
    }

    fn sample_aux<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let total = *self.cell_cdf.last().unwrap();
        let u = rng.random::<f64>() * total;
        let k = self.cell_cdf.partition_point(|&c| c < u).min(self.cell_cdf.len() - 1);
        let h = self.grid[1] - self.grid[0];
        self.grid[k] + h * rng.random::<f64>()
    }

    /// Returns the spin sample and the auxiliary draw (`0` when `β = 0`).
    pub fn sample_with_aux<R: Rng + ?Sized>(&self, rng: &mut R) -> (LabelVector, f64) {
        let beta = self.spec.beta;
        let y = if beta == 0.0 { 0.0 } else { self.sample_aux(rng) };
        let values: Vec<i8> = self
            .spec
            .fields
            .iter()
            .map(|c| {
                let p_plus = 0.5 * (1.0 + (beta * y + c).tanh());
                if rng.random::<f64>() < p_plus {
                    1
                } else {
                    -1
                }
            })
            .collect();
        (LabelVector::new(values).expect("valid spins"), y)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> LabelVector {
        self.sample_with_aux(rng).0
    }
}

pub fn sample_rfim_cw<R: Rng + ?Sized>(spec: RfimSpec, rng: &mut R) -> Result<LabelVector> {
    Ok(RfimSampler::new(spec)?.sample(rng))
}
