//! Gaussian auxiliary-variable representation of the Curie-Weiss random-field model.
//!
//! With `Y | W ~ N(w̄, 1/(nβ))` the joint weight factorises and the marginal of `Y` has
//! log-density `-nβy²/2 + Σ log 2cosh(βy + c_i)` up to a constant, while the spins are
//! conditionally independent with `E[W_i | Y] = tanh(βY + c_i)`.

use crate::numeric::log_2cosh;

/// Unnormalised log-density of `Y`: `-nβy²/2 + Σ_i log 2cosh(βy + c_i)`.
pub fn log_density(beta: f64, fields: &[f64], y: f64) -> f64 {
    let n = fields.len() as f64;
    let by = beta * y;
    -0.5 * n * beta * y * y + fields.iter().map(|c| log_2cosh(by + c)).sum::<f64>()
}

/// Standard deviation scale `1/sqrt(nβ)` of the auxiliary Gaussian.
pub fn scale(n: usize, beta: f64) -> f64 {
    1.0 / (n as f64 * beta).sqrt()
}

/// Support window `[-1 - 12s, 1 + 12s]`; the mass outside it is below `e^{-72}`.
pub fn window(n: usize, beta: f64) -> (f64, f64) {
    let s = scale(n, beta);
    (-1.0 - 12.0 * s, 1.0 + 12.0 * s)
}
