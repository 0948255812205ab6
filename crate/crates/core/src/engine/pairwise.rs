//! Exact pair form of the averaged squared discrepancy.
//!
//! By Parseval the lattice sum resums to
//! `N⁻² Σ_{j,k} α_j α_k A(z_j - z_k) - 2 Re N⁻¹ Σ_j α_j c(z_j) + Σ_m w(m) |f̂(m)|²`
//! where `A` is the periodized ball overlap (or its r-integral) and
//! `c(z) = Σ_m w(m) conj f̂(-m) e^{2πi m·z}` only involves the finitely many
//! frequencies of `f`. Nothing is truncated.

use num_complex::Complex64;

use crate::density::{DensityField, Evaluator};
use crate::engine::overlap::periodic_overlap;
use crate::spectral::{neg, norm_sq, Weighting};
use crate::sum::Accumulator;
use crate::torus::{WeightedPointSet, MAX_DIM};

/// Precomputed density-side terms, reusable across point sets.
#[derive(Clone, Debug)]
pub struct PairwiseEvaluator {
    dim: usize,
    weighting: Weighting,
    cross: Evaluator,
    density_energy: f64,
    self_overlap: f64,
}

impl PairwiseEvaluator {
    pub fn new(f: &DensityField, weighting: Weighting) -> Self {
        let d = f.dim();
        let w = |m: &[i64; MAX_DIM]| {
            let s = norm_sq(m);
            if s == 0 {
                weighting.zero_weight(d)
            } else {
                weighting.weight(d, (s as f64).sqrt())
            }
        };
        let mut energy = Accumulator::new();
        let mut terms = Vec::with_capacity(f.coeffs().len());
        for (m, c) in f.coeffs() {
            let wm = w(m);
            energy.add(wm * c.norm_sqr());
            // coefficient of e^{2πi m'·z} with m' = -m
            terms.push((neg(m), wm * c.conj()));
        }
        Self {
            dim: d,
            weighting,
            cross: Evaluator::from_terms(d, terms),
            density_energy: energy.value(),
            self_overlap: periodic_overlap(d, &weighting, &[0.0; MAX_DIM]),
        }
    }

    pub fn weighting(&self) -> Weighting {
        self.weighting
    }

    /// `Σ_m w(m) |f̂(m)|²`.
    pub fn density_energy(&self) -> f64 {
        self.density_energy
    }

    /// `N⁻² Σ_{j,k} α_j α_k A(z_j - z_k)`.
    pub fn atomic_energy(&self, ps: &WeightedPointSet) -> f64 {
        let d = self.dim;
        let pts: Vec<[f64; MAX_DIM]> = ps.points().iter().map(|p| *p.raw()).collect();
        let a = ps.weights();
        let mut acc = Accumulator::new();
        for j in 0..pts.len() {
            acc.add(a[j] * a[j] * self.self_overlap);
            let mut row = 0.0;
            for k in (j + 1)..pts.len() {
                let mut delta = [0.0; MAX_DIM];
                for i in 0..d {
                    delta[i] = pts[j][i] - pts[k][i];
                }
                row += a[k] * periodic_overlap(d, &self.weighting, &delta);
            }
            acc.add(2.0 * a[j] * row);
        }
        let n = pts.len() as f64;
        acc.value() / (n * n)
    }

    /// `N⁻¹ Σ_j α_j c(z_j)`.
    pub fn cross_term(&self, ps: &WeightedPointSet) -> Complex64 {
        if self.cross.is_empty() {
            return Complex64::default();
        }
        let mut re = Accumulator::new();
        let mut im = Accumulator::new();
        for (p, a) in ps.points().iter().zip(ps.weights()) {
            let v = self.cross.eval(p.coords()) * a;
            re.add(v.re);
            im.add(v.im);
        }
        Complex64::new(re.value(), im.value()) / ps.len() as f64
    }

    pub fn value(&self, ps: &WeightedPointSet) -> f64 {
        let p = self.atomic_energy(ps);
        let c = self.cross_term(ps).re;
        let v = p - 2.0 * c + self.density_energy;
        v.max(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::constant_density;
    use crate::torus::{TorusPoint, WeightedPointSet};

    #[test]
    fn single_point_against_uniform() {
        // ∫ (χ_{(-r,r)}(x) - 2r)² dx = 2r(1 - 2r)
        let ps = WeightedPointSet::unit_weights(vec![TorusPoint::origin(1).unwrap()]).unwrap();
        let f = constant_density(1.0, 1).unwrap();
        for r in [0.1, 0.25, 0.4] {
            let v = PairwiseEvaluator::new(&f, Weighting::Fixed { r }).value(&ps);
            assert!((v - 2.0 * r * (1.0 - 2.0 * r)).abs() < 1e-15);
        }
    }
}
