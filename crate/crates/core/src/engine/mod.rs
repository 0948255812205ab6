//! Averaged squared discrepancy `∫ |D_N(x, r)|² dx` (and its r-average) by
//! three independent routes, plus the kernel certificate machinery.

pub mod bounds;
pub mod direct;
pub mod kernel;
pub mod overlap;
pub mod pairwise;
mod spectral_sum;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::density::{DensityField, Recipe};
use crate::error::{Error, Result};
use crate::spectral::{cutoff_for_tail, lattice_tail, Weighting, DEFAULT_FREQ_BUDGET};
use crate::torus::{check_dim, unit_ball_volume, BallWindow, TorusPoint, WeightedPointSet, MAX_DIM};

pub use pairwise::PairwiseEvaluator;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Truncated lattice sum with an analytic tail bound.
    #[default]
    Spectral,
    /// Exact pair form (Parseval resummed in space).
    Pairwise,
    /// Spatial quadrature (d ≤ 2; r-average only in d = 1).
    Direct,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub method: Method,
    /// Target for the truncation tail bound (spectral route).
    pub tolerance: f64,
    /// Maximum number of frequencies the spectral route may visit.
    pub budget: u64,
    /// Also evaluate by spatial quadrature where supported.
    pub cross_check: bool,
    /// Minimum quadrature nodes per axis (direct route).
    pub quadrature_nodes: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            method: Method::Spectral,
            tolerance: 1e-6,
            budget: DEFAULT_FREQ_BUDGET,
            cross_check: false,
            quadrature_nodes: 4096,
        }
    }
}

impl EvalOptions {
    pub fn with_method(method: Method) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub dim: usize,
    pub n: usize,
    pub point_set_hash: String,
    pub density_recipe: Recipe,
    pub weighting: Weighting,
}

impl ConfigEcho {
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config echo serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyReport {
    pub value: f64,
    pub method: Method,
    /// Bound on the neglected part of the lattice sum (0 for exact routes).
    pub tail_bound: f64,
    pub cutoff: Option<f64>,
    pub frequencies: u64,
    /// Quadrature value when a cross-check was requested.
    pub cross_check: Option<f64>,
    pub config: ConfigEcho,
}

impl DiscrepancyReport {
    /// One JSON object: value, tail bound, method and config hash.
    pub fn to_json_line(&self) -> String {
        serde_json::json!({
            "value": self.value,
            "tail_bound": self.tail_bound,
            "method": self.method,
            "config_hash": self.config.hash(),
        })
        .to_string()
    }
}

fn check_compatible(ps: &WeightedPointSet, f: &DensityField) -> Result<usize> {
    if ps.dim() != f.dim() {
        return Err(Error::DimensionMismatch {
            expected: ps.dim(),
            found: f.dim(),
        });
    }
    check_dim(ps.dim())
}

/// Rough count of lattice points with `|m| ≤ M`.
fn frequency_estimate(d: usize, m: f64) -> u64 {
    let r = m + (d as f64).sqrt() / 2.0;
    (unit_ball_volume(d) * r.powi(d as i32)).ceil() as u64
}

/// `Σ_m w(m) |E(m) - f̂(-m)|²` with `w` given by `weighting`.
pub fn avg_sq(ps: &WeightedPointSet, f: &DensityField, weighting: Weighting, opts: &EvalOptions) -> Result<DiscrepancyReport> {
    let d = check_compatible(ps, f)?;
    weighting.validate()?;
    let config = ConfigEcho {
        dim: d,
        n: ps.len(),
        point_set_hash: ps.hash(),
        density_recipe: f.recipe().clone(),
        weighting,
    };
    let mut report = match opts.method {
        Method::Spectral => {
            let b = ps.mean_abs_weight();
            let coef = b * b * weighting.envelope(d);
            let floor = f.bandwidth().max(1.0).max((d as f64).sqrt());
            let m = if coef > 0.0 {
                cutoff_for_tail(d, coef, opts.tolerance, floor)
            } else {
                floor
            };
            let needed = frequency_estimate(d, m);
            if needed > opts.budget {
                return Err(Error::BudgetExceeded {
                    needed,
                    budget: opts.budget,
                });
            }
            let (value, count) = spectral_sum::truncated_sum(ps, f, weighting, m);
            DiscrepancyReport {
                value,
                method: Method::Spectral,
                tail_bound: coef * lattice_tail(d, m),
                cutoff: Some(m),
                frequencies: count,
                cross_check: None,
                config,
            }
        }
        Method::Pairwise => DiscrepancyReport {
            value: PairwiseEvaluator::new(f, weighting).value(ps),
            method: Method::Pairwise,
            tail_bound: 0.0,
            cutoff: None,
            frequencies: f.coeffs().len() as u64,
            cross_check: None,
            config,
        },
        Method::Direct => DiscrepancyReport {
            value: direct_value(ps, f, weighting, opts.quadrature_nodes)?,
            method: Method::Direct,
            tail_bound: 0.0,
            cutoff: None,
            frequencies: 0,
            cross_check: None,
            config,
        },
    };
    if opts.cross_check && opts.method != Method::Direct {
        report.cross_check = direct_value(ps, f, weighting, opts.quadrature_nodes).ok();
    }
    Ok(report)
}

fn direct_value(ps: &WeightedPointSet, f: &DensityField, weighting: Weighting, nodes: usize) -> Result<f64> {
    match weighting {
        Weighting::Fixed { r } => direct::avg_sq_x_quadrature(ps, f, r, nodes),
        Weighting::Radial { a, b } => direct::avg_sq_xr_quadrature(ps, f, a, b, nodes.min(1024)),
    }
}

/// `∫_{T^d} |D_N(x, r)|² dx`.
pub fn avg_sq_x(ps: &WeightedPointSet, f: &DensityField, r: f64, opts: &EvalOptions) -> Result<DiscrepancyReport> {
    avg_sq(ps, f, Weighting::Fixed { r }, opts)
}

/// `∫_a^b ∫_{T^d} |D_N(x, r)|² dx dr`.
pub fn avg_sq_xr(ps: &WeightedPointSet, f: &DensityField, a: f64, b: f64, opts: &EvalOptions) -> Result<DiscrepancyReport> {
    avg_sq(ps, f, Weighting::Radial { a, b }, opts)
}

/// `D_N(x, r) = N⁻¹ Σ α_j χ_{-x+B}(z_j) - ∫_{-x+B} f` for a real density.
pub fn discrepancy_at(ps: &WeightedPointSet, f: &DensityField, ball: &BallWindow, x: &TorusPoint) -> Result<f64> {
    check_compatible(ps, f)?;
    if ball.dim() != ps.dim() || x.dim() != ps.dim() {
        return Err(Error::DimensionMismatch {
            expected: ps.dim(),
            found: if ball.dim() != ps.dim() { ball.dim() } else { x.dim() },
        });
    }
    f.require_real()?;
    let mut c = [0.0; MAX_DIM];
    c[..ps.dim()].copy_from_slice(ball.center().coords());
    let mut xx = [0.0; MAX_DIM];
    xx[..ps.dim()].copy_from_slice(x.coords());
    Ok(direct::discrepancy_value(ps, f, ball.radius(), &c, &xx))
}

/// The elementary inequality `|a - b|² ≥ ½|a|² - |b|²` behind the kernel
/// lower bound; returns the slack.
pub fn elementary_slack(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm_sqr() - (0.5 * a.norm_sqr() - b.norm_sqr())
}
