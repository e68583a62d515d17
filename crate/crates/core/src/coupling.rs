//! Coupling matrices for Ising label models and their dependence diagnostics.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Thresholds that turn the asymptotic conditions on `A_n` into finite-`n` flags.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionThresholds {
    /// `mean_field` holds when `alpha_n * sqrt(n log n)` is below this.
    pub mean_field: f64,
    /// Bound on both `|Σ(R_i - 1)| / sqrt(n)` and `Σ(R_i - 1)^2 / sqrt(n)`.
    pub regularity: f64,
    /// `well_connected` holds when `lambda2 / lambda1` is below this.
    pub eigen_ratio: f64,
}

impl Default for ConditionThresholds {
    fn default() -> Self {
        Self {
            mean_field: 0.5,
            regularity: 0.1,
            eigen_ratio: 0.9,
        }
    }
}

/// Symmetric, nonnegative, zero-diagonal `n x n` coupling matrix stored densely (row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix {
    n: usize,
    entries: Vec<f64>,
    alpha_n: f64,
    row_sums: Vec<f64>,
    lambda1: f64,
    lambda2: f64,
}

impl CouplingMatrix {
    /// Validates and wraps a dense row-major matrix.
    pub fn from_dense(n: usize, entries: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidSize("coupling matrix needs n >= 1".into()));
        }
        if entries.len() != n * n {
            return Err(Error::InvalidSize(format!(
                "expected {} entries for n={n}, got {}",
                n * n,
                entries.len()
            )));
        }
        for i in 0..n {
            if entries[i * n + i] != 0.0 {
                return Err(Error::Domain(format!("nonzero diagonal at ({i},{i})")));
            }
            for j in 0..n {
                let a = entries[i * n + j];
                if !a.is_finite() || a < 0.0 {
                    return Err(Error::Domain(format!("entry ({i},{j}) = {a} must be finite and >= 0")));
                }
                if a != entries[j * n + i] {
                    return Err(Error::Domain(format!("asymmetric entries at ({i},{j})")));
                }
            }
        }
        let row_sums: Vec<f64> = entries.chunks(n).map(|r| r.iter().sum()).collect();
        let alpha_n = entries
            .chunks(n)
            .map(|r| r.iter().map(|a| a * a).sum::<f64>())
            .fold(0.0, f64::max);
        let (lambda1, lambda2) = top_two_eigenvalues(n, &entries, 1e-10);
        Ok(Self {
            n,
            entries,
            alpha_n,
            row_sums,
            lambda1,
            lambda2,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    /// `max_i Σ_j A(i,j)^2`.
    pub fn alpha_n(&self) -> f64 {
        self.alpha_n
    }

    pub fn row_sums(&self) -> &[f64] {
        &self.row_sums
    }

    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }

    pub fn lambda2(&self) -> f64 {
        self.lambda2
    }

    /// Rescales so that the maximum row sum is exactly one.
    pub fn normalize_rowsum(&self) -> Result<Self> {
        let max = self.row_sums.iter().copied().fold(0.0, f64::max);
        if max <= 0.0 {
            return Err(Error::Domain("cannot normalize the zero coupling matrix".into()));
        }
        if max == 1.0 {
            return Ok(self.clone());
        }
        let entries = self.entries.iter().map(|a| a / max).collect();
        Self::from_dense(self.n, entries)
    }

    /// `(β/2) zᵀ A z`.
    pub fn energy(&self, beta: f64, z: &[i8]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            let zi = z[i] as f64;
            let row = self.row(i);
            let field: f64 = row.iter().zip(z).map(|(a, &zj)| a * zj as f64).sum();
            s += zi * field;
        }
        0.5 * beta * s
    }

    /// Writes `(i, j, value)` triples for `i < j` with nonzero value, 0-based indices,
    /// after a `# coupling n=<n>` header line.
    pub fn to_csv_string(&self) -> String {
        let mut out = format!("# coupling n={}\n", self.n);
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                let a = self.get(i, j);
                if a != 0.0 {
                    let _ = writeln!(out, "{i},{j},{a:.16e}");
                }
            }
        }
        out
    }

    pub fn from_csv_str(text: &str, origin: &Path) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::parse(origin, "empty coupling file"))?;
        let n: usize = header
            .trim()
            .strip_prefix("# coupling n=")
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::parse(origin, format!("bad header line `{header}`")))?;
        let mut entries = vec![0.0; n * n];
        for (lineno, line) in lines.enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split(',').map(str::trim).collect();
            let bad = || Error::parse(origin, format!("line {}: `{line}`", lineno + 2));
            if parts.len() != 3 {
                return Err(bad());
            }
            let i: usize = parts[0].parse().map_err(|_| bad())?;
            let j: usize = parts[1].parse().map_err(|_| bad())?;
            let v: f64 = parts[2].parse().map_err(|_| bad())?;
            if i >= n || j >= n {
                return Err(bad());
            }
            entries[i * n + j] = v;
            entries[j * n + i] = v;
        }
        Self::from_dense(n, entries)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_str(&text, path)
    }
}

/// Curie-Weiss coupling: `A(i,j) = 1/n` off the diagonal.
pub fn make_complete(n: usize) -> Result<CouplingMatrix> {
    if n < 2 {
        return Err(Error::InvalidSize(format!("complete graph needs n >= 2, got {n}")));
    }
    let v = 1.0 / n as f64;
    let mut entries = vec![v; n * n];
    for i in 0..n {
        entries[i * n + i] = 0.0;
    }
    CouplingMatrix::from_dense(n, entries)
}

/// Perfect matching `{1-2, 3-4, ...}` with unit weights.
pub fn make_matching(n: usize) -> Result<CouplingMatrix> {
    if n == 0 || n % 2 == 1 {
        return Err(Error::InvalidSize(format!("matching needs a positive even n, got {n}")));
    }
    let mut entries = vec![0.0; n * n];
    for k in (0..n).step_by(2) {
        entries[k * n + k + 1] = 1.0;
        entries[(k + 1) * n + k] = 1.0;
    }
    CouplingMatrix::from_dense(n, entries)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub n: usize,
    pub alpha_n: f64,
    /// `alpha_n * sqrt(n log n)`.
    pub mean_field_ratio: f64,
    /// `Σ (R_i - 1)^2 / sqrt(n)`.
    pub rowsum_sq_dev: f64,
    /// `Σ (R_i - 1) / sqrt(n)`.
    pub rowsum_dev: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    /// `lambda2 / lambda1`, `None` when `lambda1 = 0`.
    pub eigen_ratio: Option<f64>,
    pub degenerate_spectrum: bool,
    pub mean_field: bool,
    pub approx_regular: bool,
    pub well_connected: bool,
    pub thresholds: ConditionThresholds,
}

pub fn check_conditions(a: &CouplingMatrix) -> ConditionReport {
    check_conditions_with(a, ConditionThresholds::default())
}

pub fn check_conditions_with(a: &CouplingMatrix, th: ConditionThresholds) -> ConditionReport {
    let n = a.n();
    let nf = n as f64;
    // log 1 = 0 would hide any violation at n = 1
    let mean_field_ratio = a.alpha_n() * (nf * nf.ln().max(f64::MIN_POSITIVE)).sqrt();
    let sq: f64 = a.row_sums().iter().map(|r| (r - 1.0) * (r - 1.0)).sum();
    let lin: f64 = a.row_sums().iter().map(|r| r - 1.0).sum();
    let rowsum_sq_dev = sq / nf.sqrt();
    let rowsum_dev = lin / nf.sqrt();
    let degenerate = a.lambda1() <= 0.0;
    let eigen_ratio = (!degenerate).then(|| a.lambda2() / a.lambda1());
    ConditionReport {
        n,
        alpha_n: a.alpha_n(),
        mean_field_ratio,
        rowsum_sq_dev,
        rowsum_dev,
        lambda1: a.lambda1(),
        lambda2: a.lambda2(),
        eigen_ratio,
        degenerate_spectrum: degenerate,
        mean_field: mean_field_ratio < th.mean_field,
        approx_regular: rowsum_dev.abs() < th.regularity && rowsum_sq_dev < th.regularity,
        well_connected: eigen_ratio.is_some_and(|r| r < th.eigen_ratio),
        thresholds: th,
    }
}

/// Two algebraically largest eigenvalues by shifted power iteration with deflation.
///
/// The shift `σ = max row sum` makes `A + σI` positive semidefinite, so the dominant
/// eigenvalue of the shifted matrix is the algebraically largest of `A`.
fn top_two_eigenvalues(n: usize, a: &[f64], tol: f64) -> (f64, f64) {
    let shift = a
        .chunks(n)
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    if shift == 0.0 {
        return (0.0, 0.0);
    }
    if n == 1 {
        return (0.0, 0.0);
    }
    let matvec = |v: &[f64], out: &mut [f64]| {
        for i in 0..n {
            let row = &a[i * n..(i + 1) * n];
            out[i] = row.iter().zip(v).map(|(x, y)| x * y).sum::<f64>() + shift * v[i];
        }
    };
    let (l1, v1) = power_iterate(n, &matvec, None, 0.618_033_988_7, tol);
    // a different start vector, so a degenerate top eigenspace is not projected away
    let (l2, _) = power_iterate(n, &matvec, Some(&v1), 0.414_213_562_3, tol);
    (l1 - shift, l2 - shift)
}

fn power_iterate<F: Fn(&[f64], &mut [f64])>(
    n: usize,
    matvec: &F,
    deflate: Option<&[f64]>,
    salt: f64,
    tol: f64,
) -> (f64, Vec<f64>) {
    // deterministic start with no special symmetry
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.37 * ((i as f64) * salt).fract()).collect();
    let project = |v: &mut [f64]| {
        if let Some(u) = deflate {
            let c: f64 = v.iter().zip(u).map(|(x, y)| x * y).sum();
            for (x, y) in v.iter_mut().zip(u) {
                *x -= c * y;
            }
        }
    };
    let normalize = |v: &mut [f64]| -> f64 {
        let s = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if s > 0.0 {
            v.iter_mut().for_each(|x| *x /= s);
        }
        s
    };
    project(&mut v);
    if normalize(&mut v) == 0.0 {
        return (0.0, v);
    }
    let mut w = vec![0.0; n];
    let mut lambda = 0.0;
    for _ in 0..20_000 {
        matvec(&v, &mut w);
        project(&mut w);
        let rq: f64 = w.iter().zip(&v).map(|(x, y)| x * y).sum();
        let s = normalize(&mut w);
        std::mem::swap(&mut v, &mut w);
        if s == 0.0 {
            return (0.0, v);
        }
        let done = (rq - lambda).abs() <= tol * rq.abs().max(1.0);
        lambda = rq;
        if done {
            break;
        }
    }
    (lambda, v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complete_graph_entries_and_alpha() {
        let a = make_complete(3).unwrap();
        assert!((a.get(0, 1) - 1.0 / 3.0).abs() < 1e-16);
        assert_eq!(a.get(1, 1), 0.0);
        assert!((a.alpha_n() - 2.0 / 9.0).abs() < 1e-16);

        let a = make_complete(2).unwrap();
        assert_eq!(a.get(0, 1), 0.5);
        assert_eq!(a.row_sums(), &[0.5, 0.5]);
    }

    #[test]
    fn complete_graph_alpha_exact_and_mean_field_ratio() {
        for n in [2usize, 5, 17, 100] {
            let a = make_complete(n).unwrap();
            let nf = n as f64;
            assert!((a.alpha_n() - (nf - 1.0) / (nf * nf)).abs() < 1e-15);
        }
        let rep = check_conditions(&make_complete(100).unwrap());
        // 99/10000 * sqrt(100 ln 100)
        let expected = 99.0 / 10000.0 * (100.0 * 100f64.ln()).sqrt();
        assert!((rep.mean_field_ratio - expected).abs() < 1e-12);
        assert!((rep.mean_field_ratio - 0.2125).abs() < 1e-3);
    }

    #[test]
    fn matching_structure() {
        let a = make_matching(4).unwrap();
        assert_eq!(a.get(0, 1), 1.0);
        assert_eq!(a.get(2, 3), 1.0);
        assert_eq!(a.get(1, 2), 0.0);
        assert_eq!(a.alpha_n(), 1.0);
        assert!(a.row_sums().iter().all(|&r| r == 1.0));
        let rep = check_conditions(&make_matching(10).unwrap());
        let expected = (10.0 * 10f64.ln()).sqrt();
        assert!((rep.mean_field_ratio - expected).abs() < 1e-12);
        assert!((rep.mean_field_ratio - 4.8).abs() < 0.01);
        assert!(!rep.mean_field);
    }

    #[test]
    fn invalid_sizes() {
        assert!(matches!(make_complete(1), Err(Error::InvalidSize(_))));
        assert!(matches!(make_matching(5), Err(Error::InvalidSize(_))));
    }

    #[test]
    fn conditions_complete_1000() {
        let a = make_complete(1000).unwrap();
        // eigenvalues of (J - I)/n are (n-1)/n and -1/n
        assert!((a.lambda1() - 0.999).abs() < 1e-9);
        assert!((a.lambda2() + 0.001).abs() < 1e-9);
        let rep = check_conditions(&a);
        assert!(rep.mean_field && rep.approx_regular && rep.well_connected);
        assert!((rep.eigen_ratio.unwrap() + 1.0 / 999.0).abs() < 1e-9);
    }

    #[test]
    fn conditions_matching_1000() {
        let rep = check_conditions(&make_matching(1000).unwrap());
        assert!(!rep.mean_field);
        assert!(rep.approx_regular);
        assert!(!rep.well_connected);
    }

    #[test]
    fn conditions_zero_matrix() {
        let a = CouplingMatrix::from_dense(4, vec![0.0; 16]).unwrap();
        let rep = check_conditions(&a);
        assert_eq!(rep.alpha_n, 0.0);
        assert!(rep.mean_field);
        assert!(!rep.well_connected);
        assert!(rep.degenerate_spectrum);
    }

    #[test]
    fn rejects_invalid_matrices() {
        assert!(CouplingMatrix::from_dense(2, vec![0.0, 1.0, 0.5, 0.0]).is_err());
        assert!(CouplingMatrix::from_dense(2, vec![1.0, 0.0, 0.0, 0.0]).is_err());
        assert!(CouplingMatrix::from_dense(2, vec![0.0, -1.0, -1.0, 0.0]).is_err());
    }

    #[test]
    fn normalize_rowsum_is_idempotent() {
        let e = vec![0.0, 2.0, 1.0, 2.0, 0.0, 3.0, 1.0, 3.0, 0.0];
        let a = CouplingMatrix::from_dense(3, e).unwrap();
        let b = a.normalize_rowsum().unwrap();
        let max = b.row_sums().iter().copied().fold(0.0, f64::max);
        assert!((max - 1.0).abs() < 1e-12);
        let c = b.normalize_rowsum().unwrap();
        for (x, y) in b.entries().iter().zip(c.entries()) {
            assert!((x - y).abs() <= 1e-15);
        }
    }

    #[test]
    fn csv_round_trip() {
        let a = make_complete(5).unwrap();
        let text = a.to_csv_string();
        assert!(text.starts_with("# coupling n=5\n"));
        let b = CouplingMatrix::from_csv_str(&text, Path::new("mem")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn eigenvalues_small_path_graph() {
        // path on 3 vertices: eigenvalues ±sqrt(2), 0
        let e = vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0];
        let a = CouplingMatrix::from_dense(3, e).unwrap();
        assert!((a.lambda1() - 2f64.sqrt()).abs() < 1e-8);
        assert!(a.lambda2().abs() < 1e-6);
    }
}
