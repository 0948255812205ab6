//! Spatial quadrature of `∫ |D_N(x, r)|² dx` (d = 1, 2) and of its
//! r-average (d = 1). Breakpoints follow the jumps of the counting term so
//! every panel integrates a smooth function.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::density::{DensityField, Evaluator};
use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;
use crate::spectral::{ball_fourier_unchecked, neg, norm_sq};
use crate::sum::Accumulator;
use crate::torus::{dist_sq_raw, wrap, WeightedPointSet, MAX_DIM};

const NODES: usize = 16;

/// Smooth part `x ↦ ∫_{-x+B(c,r)} f`.
fn ball_integral_evaluator(f: &DensityField, r: f64, c: &[f64; MAX_DIM]) -> Evaluator {
    let d = f.dim();
    let terms = f
        .coeffs()
        .iter()
        .map(|(m, v)| {
            // Σ_m f̂(-m) χ̂(m) e^{2πi m·(x - c)}: term at m carries f̂(-m)
            let mm = neg(m);
            let chi = ball_fourier_unchecked(d, r, (norm_sq(&mm) as f64).sqrt());
            let mut ph = 0.0;
            for i in 0..d {
                ph += mm[i] as f64 * c[i];
            }
            let e = Complex64::from_polar(1.0, -2.0 * PI * (ph - ph.round()));
            (mm, v * chi * e)
        })
        .collect();
    Evaluator::from_terms(d, terms)
}

/// `N⁻¹ Σ α_j [ |z_j + x - c| < r ]`.
fn count(ps: &WeightedPointSet, x: &[f64; MAX_DIM], c: &[f64; MAX_DIM], r: f64) -> f64 {
    let d = ps.dim();
    let mut shifted = [0.0; MAX_DIM];
    for i in 0..d {
        shifted[i] = c[i] - x[i];
    }
    let r2 = r * r;
    let mut s = 0.0;
    for (p, a) in ps.points().iter().zip(ps.weights()) {
        if dist_sq_raw(d, p.raw(), &shifted) < r2 {
            s += a;
        }
    }
    s / ps.len() as f64
}

fn sorted_breaks(mut v: Vec<f64>) -> Vec<f64> {
    v.push(-0.5);
    v.push(0.5);
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
    v
}

/// `D_N(x, r)` pointwise.
pub fn discrepancy_value(ps: &WeightedPointSet, f: &DensityField, r: f64, c: &[f64; MAX_DIM], x: &[f64; MAX_DIM]) -> f64 {
    let ev = ball_integral_evaluator(f, r, c);
    count(ps, x, c, r) - ev.eval(&x[..ps.dim()]).re
}

/// `∫ |D_N(x, r)|² dx` in d = 1 with at least `min_nodes` nodes in total.
fn sq_d1(ps: &WeightedPointSet, f: &DensityField, r: f64, c: &[f64; MAX_DIM], min_nodes: usize) -> f64 {
    let ev = ball_integral_evaluator(f, r, c);
    let breaks = sorted_breaks(
        ps.points()
            .iter()
            .flat_map(|p| {
                let u = c[0] - p.coords()[0];
                [wrap(u - r), wrap(u + r)]
            })
            .collect(),
    );
    let g = GaussLegendre::new(NODES);
    let density = (min_nodes / NODES).max(2 * f.max_component() as usize + 2) as f64;
    let mut acc = Accumulator::new();
    for w in breaks.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi <= lo {
            continue;
        }
        let mid = [0.5 * (lo + hi), 0.0, 0.0];
        let k = count(ps, &mid, c, r);
        let panels = ((hi - lo) * density).ceil().max(1.0) as usize;
        acc.add(g.composite(lo, hi, panels, |x| (Complex64::new(k, 0.0) - ev.eval(&[x])).norm_sqr()));
    }
    acc.value()
}

/// y-coordinates where the inner integrand over x₁ changes structure: circle
/// tangencies and pairwise circle intersections.
fn outer_breaks_d2(centers: &[[f64; 2]], r: f64) -> Vec<f64> {
    let mut v = Vec::new();
    for u in centers {
        v.push(wrap(u[1] - r));
        v.push(wrap(u[1] + r));
    }
    for (j, u) in centers.iter().enumerate() {
        for w in &centers[j + 1..] {
            for ex in [-1.0, 0.0, 1.0] {
                for ey in [-1.0, 0.0, 1.0] {
                    let dx = wrap(w[0] - u[0]) + ex;
                    let dy = wrap(w[1] - u[1]) + ey;
                    let dd = (dx * dx + dy * dy).sqrt();
                    if dd > 0.0 && dd < 2.0 * r {
                        let h = (r * r - 0.25 * dd * dd).max(0.0).sqrt();
                        let my = u[1] + 0.5 * dy;
                        v.push(wrap(my + h * dx / dd));
                        v.push(wrap(my - h * dx / dd));
                    }
                }
            }
        }
    }
    sorted_breaks(v)
}

fn sq_d2(ps: &WeightedPointSet, f: &DensityField, r: f64, c: &[f64; MAX_DIM], min_nodes: usize) -> f64 {
    let ev = ball_integral_evaluator(f, r, c);
    let centers: Vec<[f64; 2]> = ps
        .points()
        .iter()
        .map(|p| [wrap(c[0] - p.coords()[0]), wrap(c[1] - p.coords()[1])])
        .collect();
    let outer = outer_breaks_d2(&centers, r);
    let g = GaussLegendre::new(NODES);
    // pieces are smooth, so a few panels per unit length per axis suffice
    let density = (min_nodes / (NODES * NODES)).max(2 * f.max_component() as usize + 2) as f64;
    let inner = |y: f64| -> f64 {
        let mut br = Vec::new();
        for u in &centers {
            let dy = wrap(y - u[1]);
            if dy.abs() < r {
                let h = (r * r - dy * dy).sqrt();
                br.push(wrap(u[0] - h));
                br.push(wrap(u[0] + h));
            }
        }
        let br = sorted_breaks(br);
        let mut acc = Accumulator::new();
        for w in br.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            if hi <= lo {
                continue;
            }
            let k = count(ps, &[0.5 * (lo + hi), y, 0.0], c, r);
            let panels = ((hi - lo) * density).ceil().max(1.0) as usize;
            acc.add(g.composite(lo, hi, panels, |x| (Complex64::new(k, 0.0) - ev.eval(&[x, y])).norm_sqr()));
        }
        acc.value()
    };
    let mut acc = Accumulator::new();
    for w in outer.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi <= lo {
            continue;
        }
        // y = lo + (hi - lo) S(t), S(t) = 3t² - 2t³, flattens √ endpoint behaviour
        let len = hi - lo;
        let panels = (len * density).ceil().max(2.0) as usize;
        acc.add(g.composite(0.0, 1.0, panels, |t| {
            let s = t * t * (3.0 - 2.0 * t);
            let ds = 6.0 * t * (1.0 - t);
            inner(lo + len * s) * len * ds
        }));
    }
    acc.value()
}

/// `∫_{T^d} |D_N(x, r)|² dx` by quadrature with at least `min_nodes` nodes
/// per axis.
pub fn avg_sq_x_quadrature(ps: &WeightedPointSet, f: &DensityField, r: f64, min_nodes: usize) -> Result<f64> {
    let c = [0.0; MAX_DIM];
    match ps.dim() {
        1 => Ok(sq_d1(ps, f, r, &c, min_nodes)),
        2 => Ok(sq_d2(ps, f, r, &c, min_nodes)),
        d => Err(Error::UnsupportedDimension(d)),
    }
}

/// `∫_a^b ∫_T |D_N(x, r)|² dx dr` by nested quadrature (d = 1).
pub fn avg_sq_xr_quadrature(ps: &WeightedPointSet, f: &DensityField, a: f64, b: f64, min_nodes: usize) -> Result<f64> {
    if ps.dim() != 1 {
        return Err(Error::UnsupportedDimension(ps.dim()));
    }
    let c = [0.0; MAX_DIM];
    // the jump pattern in x changes where 2r hits a pair distance
    let mut br = vec![a, b];
    let xs: Vec<f64> = ps.points().iter().map(|p| p.coords()[0]).collect();
    for j in 0..xs.len() {
        for k in (j + 1)..xs.len() {
            let dlt = wrap(xs[j] - xs[k]).abs();
            for r in [0.5 * dlt, 0.5 * (1.0 - dlt)] {
                if r > a && r < b {
                    br.push(r);
                }
            }
        }
    }
    br.sort_by(|x, y| x.partial_cmp(y).unwrap());
    br.dedup_by(|x, y| (*x - *y).abs() < 1e-15);
    let g = GaussLegendre::new(NODES);
    let density = (2 * f.max_component() as usize + 8) as f64;
    let mut acc = Accumulator::new();
    for w in br.windows(2) {
        let panels = ((w[1] - w[0]) * density).ceil().max(1.0) as usize;
        acc.add(g.composite(w[0], w[1], panels, |r| sq_d1(ps, f, r, &c, min_nodes)));
    }
    Ok(acc.value())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::constant_density;
    use crate::torus::TorusPoint;

    #[test]
    fn single_point_anchor() {
        let ps = WeightedPointSet::unit_weights(vec![TorusPoint::origin(1).unwrap()]).unwrap();
        let f = constant_density(1.0, 1).unwrap();
        let v = avg_sq_x_quadrature(&ps, &f, 0.25, 4096).unwrap();
        assert!((v - 0.25).abs() < 1e-13);
        let c = [0.0; MAX_DIM];
        assert!((discrepancy_value(&ps, &f, 0.25, &c, &[0.0; 3]) - 0.5).abs() < 1e-15);
        assert!((discrepancy_value(&ps, &f, 0.25, &c, &[0.4, 0.0, 0.0]) + 0.5).abs() < 1e-15);
    }

    #[test]
    fn single_point_d2() {
        // ∫ (χ_B - |B|)² = |B|(1 - |B|)
        let ps = WeightedPointSet::unit_weights(vec![TorusPoint::new(&[0.1, -0.2]).unwrap()]).unwrap();
        let f = constant_density(1.0, 2).unwrap();
        let r = 0.3;
        let vol = PI * r * r;
        let v = avg_sq_x_quadrature(&ps, &f, r, 256).unwrap();
        assert!((v - vol * (1.0 - vol)).abs() < 1e-9, "{v}");
    }
}
