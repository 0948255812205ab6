//! Rate functionals of the lower bounds, without their unknown constants, and
//! the bandwidth choices that balance them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::torus::check_dim;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum BoundMode {
    /// `f ∈ L^p`, `1 < p ≤ 2`.
    Lp { p: f64 },
    /// `f` in the Morrey space `M_{1,λ}`, `0 < λ ≤ d`.
    Morrey { lambda: f64 },
}

impl BoundMode {
    pub fn validate(&self, d: usize) -> Result<()> {
        check_dim(d)?;
        match *self {
            BoundMode::Lp { p } if !(p > 1.0 && p <= 2.0) => Err(Error::InvalidParameter {
                name: "p",
                value: p,
                reason: "need 1 < p <= 2",
            }),
            BoundMode::Morrey { lambda } if !(lambda > 0.0 && lambda <= d as f64) => {
                Err(Error::InvalidParameter {
                    name: "lambda",
                    value: lambda,
                    reason: "need 0 < lambda <= d",
                })
            }
            _ => Ok(()),
        }
    }

    /// `(exponent of N, exponent of ‖α‖, exponent of ‖f‖)`.
    pub fn exponents(&self, d: usize) -> (f64, f64, f64) {
        let d = d as f64;
        match *self {
            BoundMode::Lp { p } => {
                let q = p / (p - 1.0);
                (-1.0 - q / (2.0 * d), 2.0 + q / d, -q / d)
            }
            BoundMode::Morrey { lambda } => (-1.0 - 1.0 / lambda, 2.0 + 1.0 / lambda, -1.0 / lambda),
        }
    }
}

/// `N^{-1-q/(2d)} ‖α‖^{2+q/d} ‖f‖_p^{-q/d}` or `N^{-1-1/λ} ‖α‖^{2+1/λ} ‖f‖_{1,λ}^{-1/λ}`.
pub fn lower_bound_scale(mode: BoundMode, d: usize, n: usize, alpha_norm: f64, f_norm: f64) -> Result<f64> {
    mode.validate(d)?;
    if n == 0 {
        return Err(Error::EmptyPointSet);
    }
    if !(f_norm > 0.0) {
        return Err(Error::InvalidParameter {
            name: "f_norm",
            value: f_norm,
            reason: "density norm must be positive",
        });
    }
    let (en, ea, ef) = mode.exponents(d);
    Ok((n as f64).powf(en) * alpha_norm.powf(ea) * f_norm.powf(ef))
}

/// Kernel bandwidth balancing the two terms of the L^p argument:
/// `(4 c N ‖f‖_p² / (k₀ ‖α‖²))^{q/(2d)}`.
pub fn lp_bandwidth(p: f64, d: usize, n: usize, alpha_norm: f64, f_norm: f64, c: f64, k0: f64) -> f64 {
    let q = p / (p - 1.0);
    (4.0 * c * n as f64 * f_norm * f_norm / (k0 * alpha_norm * alpha_norm)).powf(q / (2.0 * d as f64))
}

/// Kernel bandwidth for the Morrey argument: `(2 c₂ N ‖f‖_{1,λ} / (c₁ ‖α‖))^{1/λ}`.
pub fn morrey_bandwidth(lambda: f64, n: usize, alpha_norm: f64, f_norm: f64, c1: f64, c2: f64) -> f64 {
    (2.0 * c2 * n as f64 * f_norm / (c1 * alpha_norm)).powf(1.0 / lambda)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn l2_exponent() {
        for d in 1..=3 {
            let (en, _, _) = BoundMode::Lp { p: 2.0 }.exponents(d);
            assert!((en - (-1.0 - 1.0 / d as f64)).abs() < 1e-15);
        }
    }

    #[test]
    fn unit_norms_give_power_of_n() {
        let v = lower_bound_scale(BoundMode::Lp { p: 1.5 }, 2, 100, 1.0, 1.0).unwrap();
        // q = 3: N^{-1-3/4}
        assert!((v - 100f64.powf(-1.75)).abs() < 1e-15);
    }

    #[test]
    fn homogeneous_of_degree_two() {
        for mode in [BoundMode::Lp { p: 1.3 }, BoundMode::Lp { p: 2.0 }, BoundMode::Morrey { lambda: 0.7 }] {
            let base = lower_bound_scale(mode, 1, 50, 0.8, 1.7).unwrap();
            let t = 3.1;
            let scaled = lower_bound_scale(mode, 1, 50, 0.8 * t, 1.7 * t).unwrap();
            assert!((scaled / base - t * t).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(lower_bound_scale(BoundMode::Lp { p: 1.0 }, 1, 4, 1.0, 1.0).is_err());
        assert!(lower_bound_scale(BoundMode::Lp { p: 2.5 }, 1, 4, 1.0, 1.0).is_err());
        assert!(lower_bound_scale(BoundMode::Morrey { lambda: 2.5 }, 2, 4, 1.0, 1.0).is_err());
        assert!(lower_bound_scale(BoundMode::Morrey { lambda: 2.0 }, 2, 4, 1.0, 1.0).is_ok());
    }
}
