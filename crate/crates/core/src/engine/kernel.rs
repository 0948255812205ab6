//! Non-negative band-limited kernels `K_M` and the energy certificate
//! `I = Σ_m K̂(m) |E(m)|² = N⁻² Σ_{j,k} α_j α_k K(z_j - z_k) ≥ K(0) N⁻¹ ‖α‖²`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::density::{phasor_table, DensityField};
use crate::error::{Error, Result};
use crate::spectral::{neg, norm_sq, Freq, Weighting};
use crate::sum::Accumulator;
use crate::torus::{check_dim, weight_norm, wrap, WeightedPointSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KernelFamily {
    /// `Π_i (1/M) (sin πMx_i / sin πx_i)²`, profile `Π_i (1 - |m_i|/M)_+`.
    FejerTensor,
    /// `|ψ|² / Σ ψ̂²` with `ψ̂(n) = (1 - 4|n/M|²)_+^order`.
    SmoothBump { order: u32 },
}

impl Default for KernelFamily {
    fn default() -> Self {
        KernelFamily::FejerTensor
    }
}

#[derive(Clone, Debug)]
pub struct SpectralKernel {
    family: KernelFamily,
    bandwidth: usize,
    dim: usize,
    profile: BTreeMap<Freq, f64>,
    /// `ψ̂` on its support, for the bump family.
    psi: Vec<(Freq, f64)>,
    psi_sq: f64,
    at_zero: f64,
}

fn for_box(d: usize, k: i64, mut f: impl FnMut(Freq)) {
    let r = |i: usize| if i < d { -k..=k } else { 0..=0 };
    for a in r(0) {
        for b in r(1) {
            for c in r(2) {
                f([a, b, c]);
            }
        }
    }
}

pub fn make_kernel(family: KernelFamily, m: usize, d: usize) -> Result<SpectralKernel> {
    check_dim(d)?;
    if m == 0 {
        return Err(Error::InvalidParameter {
            name: "M",
            value: 0.0,
            reason: "kernel bandwidth must be at least 1",
        });
    }
    let mf = m as f64;
    let mut profile = BTreeMap::new();
    match family {
        KernelFamily::FejerTensor => {
            for_box(d, m as i64 - 1, |k| {
                let v: f64 = (0..d).map(|i| 1.0 - k[i].unsigned_abs() as f64 / mf).product();
                profile.insert(k, v);
            });
            Ok(SpectralKernel {
                family,
                bandwidth: m,
                dim: d,
                profile,
                psi: Vec::new(),
                psi_sq: 0.0,
                at_zero: mf.powi(d as i32),
            })
        }
        KernelFamily::SmoothBump { order } => {
            if order == 0 {
                return Err(Error::InvalidParameter {
                    name: "order",
                    value: 0.0,
                    reason: "bump order must be at least 1",
                });
            }
            let mut psi = Vec::new();
            for_box(d, (mf / 2.0).floor() as i64, |n| {
                let x = 1.0 - 4.0 * norm_sq(&n) as f64 / (mf * mf);
                if x > 0.0 {
                    psi.push((n, x.powi(order as i32)));
                }
            });
            let psi_sq: f64 = psi.iter().map(|(_, v)| v * v).sum();
            let psi_sum: f64 = psi.iter().map(|(_, v)| v).sum();
            let lookup: BTreeMap<Freq, f64> = psi.iter().copied().collect();
            for_box(d, m as i64, |k| {
                let mut acc = Accumulator::new();
                for (n, v) in &psi {
                    let nk = [n[0] - k[0], n[1] - k[1], n[2] - k[2]];
                    if let Some(u) = lookup.get(&nk) {
                        acc.add(v * u);
                    }
                }
                let v = acc.value() / psi_sq;
                if v > 0.0 {
                    profile.insert(k, v);
                }
            });
            Ok(SpectralKernel {
                family,
                bandwidth: m,
                dim: d,
                profile,
                psi,
                psi_sq,
                at_zero: psi_sum * psi_sum / psi_sq,
            })
        }
    }
}

impl SpectralKernel {
    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `K̂(m)` on its support.
    pub fn profile(&self) -> &BTreeMap<Freq, f64> {
        &self.profile
    }

    pub fn fourier(&self, m: &Freq) -> f64 {
        self.profile.get(m).copied().unwrap_or(0.0)
    }

    /// `K(0)`.
    pub fn at_zero(&self) -> f64 {
        self.at_zero
    }

    /// `K(0) / M^d`; exactly 1 for the Fejér family.
    pub fn k0(&self) -> f64 {
        self.at_zero / (self.bandwidth as f64).powi(self.dim as i32)
    }

    /// Exponent `h` of the decay `K(x) ≲ M^d (1 + M|x|)^{-h}`.
    pub fn decay_order(&self) -> f64 {
        match self.family {
            KernelFamily::FejerTensor => 2.0,
            KernelFamily::SmoothBump { order } => 2.0 * (order as f64 + 1.0),
        }
    }

    /// `K(x)` from its closed form.
    pub fn eval(&self, x: &[f64]) -> f64 {
        let d = self.dim;
        match self.family {
            KernelFamily::FejerTensor => {
                let m = self.bandwidth as f64;
                (0..d)
                    .map(|i| {
                        let t = wrap(x[i]);
                        let s = (PI * t).sin();
                        if s == 0.0 {
                            m
                        } else {
                            let q = (PI * m * t).sin() / s;
                            q * q / m
                        }
                    })
                    .product()
            }
            KernelFamily::SmoothBump { .. } => {
                let mut re = Accumulator::new();
                let mut im = Accumulator::new();
                for (n, v) in &self.psi {
                    let mut ph = 0.0;
                    for i in 0..d {
                        ph += n[i] as f64 * x[i];
                    }
                    let e = Complex64::from_polar(*v, 2.0 * PI * (ph - ph.round()));
                    re.add(e.re);
                    im.add(e.im);
                }
                (re.value().powi(2) + im.value().powi(2)) / self.psi_sq
            }
        }
    }
}

/// Both evaluations of the energy `I` and the bound it must satisfy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub spectral: f64,
    pub point_sum: f64,
    pub relative_gap: f64,
    /// `K(0) N⁻¹ ‖α‖²`.
    pub bound: f64,
    pub holds: bool,
}

/// `E(m)` on the box `|m_i| ≤ K`, indexed row-major by `m + K`.
pub(crate) fn exp_sums_on_box(ps: &WeightedPointSet, k: i64) -> Vec<Complex64> {
    let d = ps.dim();
    let w = (2 * k + 1) as usize;
    let mut out = vec![Complex64::default(); w.pow(d as u32)];
    let n = ps.len() as f64;
    for (p, a) in ps.points().iter().zip(ps.weights()) {
        let t: Vec<Vec<Complex64>> = p.coords().iter().map(|&x| phasor_table(x, k)).collect();
        match d {
            1 => {
                for (o, e) in out.iter_mut().zip(&t[0]) {
                    *o += e * a;
                }
            }
            2 => {
                for i in 0..w {
                    let ai = t[0][i] * a;
                    for j in 0..w {
                        out[i * w + j] += ai * t[1][j];
                    }
                }
            }
            _ => {
                for i in 0..w {
                    for j in 0..w {
                        let aij = t[0][i] * t[1][j] * a;
                        for l in 0..w {
                            out[(i * w + j) * w + l] += aij * t[2][l];
                        }
                    }
                }
            }
        }
    }
    for o in out.iter_mut() {
        *o /= n;
    }
    out
}

pub(crate) fn box_index(m: &Freq, d: usize, k: i64) -> usize {
    let w = (2 * k + 1) as usize;
    let mut idx = 0;
    for i in 0..d {
        idx = idx * w + (m[i] + k) as usize;
    }
    idx
}

fn check_weights(ps: &WeightedPointSet) -> Result<()> {
    if !ps.nonneg() {
        return Err(Error::SignedWeights);
    }
    if ps.weights().iter().all(|&a| a == 0.0) {
        return Err(Error::ZeroWeights);
    }
    Ok(())
}

/// Computes `I` spectrally and as a point double sum. Refuses signed or
/// all-zero weights, for which the lower bound has no content.
pub fn montgomery_certificate(ps: &WeightedPointSet, kernel: &SpectralKernel) -> Result<Certificate> {
    if ps.dim() != kernel.dim {
        return Err(Error::DimensionMismatch {
            expected: kernel.dim,
            found: ps.dim(),
        });
    }
    check_weights(ps)?;
    let d = ps.dim();
    let k = kernel.bandwidth as i64;
    let e = exp_sums_on_box(ps, k);
    let mut spec = Accumulator::new();
    for (m, v) in &kernel.profile {
        spec.add(v * e[box_index(m, d, k)].norm_sqr());
    }
    let pts = ps.points();
    let a = ps.weights();
    let mut pair = Accumulator::new();
    for j in 0..pts.len() {
        pair.add(a[j] * a[j] * kernel.at_zero);
        let mut row = 0.0;
        for l in (j + 1)..pts.len() {
            let delta = pts[j].sub(&pts[l])?;
            row += a[l] * kernel.eval(delta.coords());
        }
        pair.add(2.0 * a[j] * row);
    }
    let n = pts.len() as f64;
    let point_sum = pair.value() / (n * n);
    let spectral = spec.value();
    let bound = kernel.at_zero * weight_norm(ps).powi(2) / n;
    let relative_gap = (spectral - point_sum).abs() / spectral.abs().max(point_sum.abs()).max(f64::MIN_POSITIVE);
    Ok(Certificate {
        spectral,
        point_sum,
        relative_gap,
        bound,
        holds: spectral.min(point_sum) >= bound * (1.0 - 1e-12),
    })
}

/// Lower bound on `Σ_m w(m) |E(m) - f̂(-m)|²` from the kernel:
/// `min_{supp K̂} w · (½ I - Σ K̂(m) |f̂(-m)|²)`, using `|a-b|² ≥ ½|a|² - |b|²`.
pub fn certified_lower_bound(
    ps: &WeightedPointSet,
    f: &DensityField,
    kernel: &SpectralKernel,
    weighting: Weighting,
) -> Result<f64> {
    let cert = montgomery_certificate(ps, kernel)?;
    let d = ps.dim();
    let mut w_min = f64::INFINITY;
    let mut leak = Accumulator::new();
    let mut seen = std::collections::BTreeSet::new();
    for (m, v) in &kernel.profile {
        let s = norm_sq(m);
        if seen.insert(s) {
            let w = if s == 0 {
                weighting.zero_weight(d)
            } else {
                weighting.weight(d, (s as f64).sqrt())
            };
            w_min = w_min.min(w);
        }
        leak.add(v * f.coef(&neg(m)).norm_sqr());
    }
    Ok((w_min * (0.5 * cert.spectral.min(cert.point_sum) - leak.value())).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::{grid_points, TorusPoint};

    #[test]
    fn fejer_profile() {
        let k = make_kernel(KernelFamily::FejerTensor, 4, 1).unwrap();
        assert_eq!(k.fourier(&[2, 0, 0]), 0.5);
        assert_eq!(k.fourier(&[4, 0, 0]), 0.0);
        assert_eq!(k.fourier(&[0, 0, 0]), 1.0);
        assert_eq!(k.eval(&[0.0]), 4.0);
        let k2 = make_kernel(KernelFamily::FejerTensor, 5, 2).unwrap();
        assert_eq!(k2.at_zero(), 25.0);
        assert_eq!(k2.eval(&[0.0, 0.0]), 25.0);
        assert_eq!(k2.k0(), 1.0);
    }

    #[test]
    fn closed_forms_match_profiles() {
        for fam in [KernelFamily::FejerTensor, KernelFamily::SmoothBump { order: 3 }] {
            let k = make_kernel(fam, 6, 2).unwrap();
            for x in [[0.0, 0.0], [0.13, -0.4], [0.5, 0.25]] {
                let mut s = Accumulator::new();
                for (m, v) in k.profile() {
                    let ph = m[0] as f64 * x[0] + m[1] as f64 * x[1];
                    s.add(v * (2.0 * PI * ph).cos());
                }
                assert!((s.value() - k.eval(&x)).abs() < 1e-10, "{fam:?} {x:?}");
            }
        }
    }

    #[test]
    fn single_point_attains_bound() {
        let ps = WeightedPointSet::unit_weights(vec![TorusPoint::origin(1).unwrap()]).unwrap();
        let k = make_kernel(KernelFamily::FejerTensor, 7, 1).unwrap();
        let c = montgomery_certificate(&ps, &k).unwrap();
        assert!((c.spectral - 7.0).abs() < 1e-12);
        assert!((c.point_sum - 7.0).abs() < 1e-12);
        assert!((c.bound - 7.0).abs() < 1e-12);
        assert!(c.holds);
    }

    #[test]
    fn grid_below_bandwidth() {
        let g = grid_points(8, 2).unwrap();
        let k = make_kernel(KernelFamily::FejerTensor, 5, 2).unwrap();
        let c = montgomery_certificate(&g, &k).unwrap();
        assert!((c.spectral - 1.0).abs() < 1e-12);
        assert!((c.point_sum - 1.0).abs() < 1e-12);
        assert!((c.bound - 25.0 / 64.0).abs() < 1e-15);
    }

    #[test]
    fn refuses_signed_and_zero() {
        let pts = vec![TorusPoint::origin(1).unwrap(); 2];
        let k = make_kernel(KernelFamily::FejerTensor, 3, 1).unwrap();
        let s = WeightedPointSet::new(pts.clone(), vec![1.0, -1.0]).unwrap();
        assert!(matches!(montgomery_certificate(&s, &k), Err(Error::SignedWeights)));
        let z = WeightedPointSet::new(pts, vec![0.0, 0.0]).unwrap();
        assert!(matches!(montgomery_certificate(&z, &k), Err(Error::ZeroWeights)));
    }
}
