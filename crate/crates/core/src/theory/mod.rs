//! Limiting quantities: magnetisation, mixture expectations, information matrices,
//! sandwich variances, identity checks and the paired-coupling Fisher information.

mod identities;
mod info;
mod paired;
pub mod quadrature;

pub use identities::{verify_identities, IdentityReport};
pub use info::{
    info_iid, info_report, mixture_expect, ExpectKind, Expectation, InfoReport, VarBlocks,
};
pub(crate) use info::{invert, mat_rows};
pub use paired::{paired_fisher_info, PairedInfo};

use crate::numeric::bisect;

/// Nonnegative root of `m = tanh(βm)`: `0` for `β ≤ 1`, the positive root otherwise.
pub fn solve_m(beta: f64) -> f64 {
    if beta <= 1.0 {
        return 0.0;
    }
    bisect(|m| m - (beta * m).tanh(), 1e-12, 1.0, 1e-14)
}

/// `C(β) = (1-m²)/(1-β(1-m²))`; `+∞` at `β = 1`.
pub fn c_beta(beta: f64) -> f64 {
    let m = solve_m(beta);
    let q = 1.0 - m * m;
    let den = 1.0 - beta * q;
    if den <= 0.0 {
        f64::INFINITY
    } else {
        q / den
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn magnetization_values() {
        assert_eq!(solve_m(0.0), 0.0);
        assert_eq!(solve_m(1.0), 0.0);
        let m2 = solve_m(2.0);
        assert!((m2 - 0.957504).abs() < 1e-5, "{m2}");
        assert!((m2 - (2.0 * m2).tanh()).abs() < 1e-13);
        let m15 = solve_m(1.5);
        assert!((m15 - (1.5 * m15).tanh()).abs() < 1e-13);
        assert!((m15 - 0.858559).abs() < 1e-5, "{m15}");
        assert!(solve_m(1.0001) < 0.02);
    }

    #[test]
    fn c_beta_values() {
        assert!((c_beta(0.0) - 1.0).abs() < 1e-15);
        assert!((c_beta(0.5) - 2.0).abs() < 1e-15);
        assert!(c_beta(1.0).is_infinite());
        assert!(c_beta(1.5).is_finite() && c_beta(1.5) > 0.0);
    }
}
