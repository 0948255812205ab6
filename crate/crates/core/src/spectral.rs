//! Ball transforms, radial weights, lattice enumeration and exponential sums.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bessel::ball_profile;
use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;
use crate::sum::Accumulator;
use crate::torus::{check_dim, check_interval, check_radius, unit_ball_volume, WeightedPointSet, MAX_DIM};

/// A lattice frequency; components beyond the dimension are zero.
pub type Freq = [i64; MAX_DIM];

/// Default cap on the number of enumerated frequencies.
pub const DEFAULT_FREQ_BUDGET: u64 = 50_000_000;

const RADIAL_NODES: usize = 20;

fn radial_rule() -> &'static GaussLegendre {
    static RULE: std::sync::OnceLock<GaussLegendre> = std::sync::OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(RADIAL_NODES))
}

#[inline]
pub fn norm_sq(m: &Freq) -> i64 {
    m[0] * m[0] + m[1] * m[1] + m[2] * m[2]
}

#[inline]
pub fn neg(m: &Freq) -> Freq {
    [-m[0], -m[1], -m[2]]
}

/// `χ̂_{B_r}(m)` as a function of `|m|`.
pub fn ball_fourier(d: usize, r: f64, m_norm: f64) -> Result<f64> {
    check_dim(d)?;
    check_radius(r)?;
    Ok(ball_fourier_unchecked(d, r, m_norm))
}

#[inline]
pub(crate) fn ball_fourier_unchecked(d: usize, r: f64, m_norm: f64) -> f64 {
    unit_ball_volume(d) * r.powi(d as i32) * ball_profile(d, 2.0 * PI * r * m_norm)
}

/// `∫_a^b |χ̂_{B_r}(m)|² dr`.
pub fn radial_weight(d: usize, a: f64, b: f64, m_norm: f64) -> Result<f64> {
    check_dim(d)?;
    check_interval(a, b)?;
    Ok(radial_weight_unchecked(d, a, b, m_norm))
}

pub(crate) fn radial_weight_unchecked(d: usize, a: f64, b: f64, m_norm: f64) -> f64 {
    // Elementary antiderivatives exist for d = 1, 3; they cancel badly at
    // small 2π r |m|, where quadrature takes over.
    let ta = 2.0 * PI * a * m_norm;
    match d {
        1 if ta >= 0.5 => {
            let g = |r: f64| r / 2.0 - (4.0 * PI * r * m_norm).sin() / (8.0 * PI * m_norm);
            (g(b) - g(a)) / (PI * PI * m_norm * m_norm)
        }
        3 if ta >= 2.0 => {
            // ∫ (sin u - u cos u)² du
            let big_f = |u: f64| {
                let (s2, c2) = (2.0 * u).sin_cos();
                u / 2.0 + u * u * u / 6.0 + 0.75 * u * c2 + (u * u / 4.0 - 0.625) * s2
            };
            let tb = 2.0 * PI * b * m_norm;
            (big_f(tb) - big_f(ta)) / (2.0 * PI * m_norm) / (4.0 * PI.powi(4) * m_norm.powi(6))
        }
        _ => {
            // |χ̂|² oscillates in r with period 1/(2|m|); one panel per period.
            let panels = (2.0 * m_norm * (b - a)).ceil().max(1.0) as usize;
            radial_rule().composite(a, b, panels, |r| {
                let c = ball_fourier_unchecked(d, r, m_norm);
                c * c
            })
        }
    }
}

/// Radial weight by plain composite quadrature, bypassing closed forms.
#[cfg(test)]
fn radial_weight_quadrature(d: usize, a: f64, b: f64, m_norm: f64) -> f64 {
    let panels = (2.0 * m_norm * (b - a)).ceil().max(1.0) as usize;
    radial_rule().composite(a, b, panels, |r| ball_fourier_unchecked(d, r, m_norm).powi(2))
}

/// Constant `C(r)` with `|χ̂_{B_r}(m)|² ≤ C |m|^{-d-1}` for all `|m| ≥ 1`.
pub fn fixed_envelope(d: usize, r: f64) -> f64 {
    match d {
        1 => 1.0 / (PI * PI),
        // x (J_1² + Y_1²)(x) decreases, so x J_1(x)² ≤ 0.8040 for x ≥ 1;
        // below 1, J_1(x)² ≤ x²/4.
        2 => 0.805 * r / (2.0 * PI),
        3 => (1.0 + 2.0 * PI * r).powi(2) / (4.0 * PI.powi(4)),
        _ => f64::NAN,
    }
}

/// `∫_a^b C(r) dr` for the envelope above.
pub fn radial_envelope(d: usize, a: f64, b: f64) -> f64 {
    match d {
        1 => (b - a) / (PI * PI),
        2 => 0.805 * (b * b - a * a) / (4.0 * PI),
        3 => {
            let g = |r: f64| (1.0 + 2.0 * PI * r).powi(3) / (6.0 * PI);
            (g(b) - g(a)) / (4.0 * PI.powi(4))
        }
        _ => f64::NAN,
    }
}

/// Upper bound on `Σ_{|m| > M} |m|^{-d-1}`; requires `M > √d/2`.
pub fn lattice_tail(d: usize, m_max: f64) -> f64 {
    let h = (d as f64).sqrt() / 2.0;
    if m_max <= h {
        return f64::INFINITY;
    }
    let surface = match d {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => return f64::NAN,
    };
    (1.0 + h / m_max).powi(d as i32 + 1) * surface / (m_max - h)
}

/// Smallest cutoff (at least `floor`) whose tail `coef · Σ_{|m|>M} |m|^{-d-1}`
/// is below `tol`.
pub fn cutoff_for_tail(d: usize, coef: f64, tol: f64, floor: f64) -> f64 {
    let mut m = floor.max(1.0);
    if coef <= 0.0 {
        return m;
    }
    while coef * lattice_tail(d, m) > tol {
        m *= 1.25;
        if m > 1e12 {
            break;
        }
    }
    // tighten by bisection on the last bracket
    let (mut lo, mut hi) = (m / 1.25, m);
    if lo < floor.max(1.0) {
        return m;
    }
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if coef * lattice_tail(d, mid) > tol {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// How the per-frequency weight is formed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Weighting {
    /// `|χ̂_{B_r}(m)|²`.
    Fixed { r: f64 },
    /// `∫_a^b |χ̂_{B_r}(m)|² dr`.
    Radial { a: f64, b: f64 },
}

impl Weighting {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Weighting::Fixed { r } => check_radius(r),
            Weighting::Radial { a, b } => check_interval(a, b),
        }
    }

    /// Weight at a frequency of norm `m_norm`.
    pub fn weight(&self, d: usize, m_norm: f64) -> f64 {
        match *self {
            Weighting::Fixed { r } => {
                let c = ball_fourier_unchecked(d, r, m_norm);
                c * c
            }
            Weighting::Radial { a, b } => {
                radial_weight_unchecked(d, a, b, m_norm)
            }
        }
    }

    /// Weights for every squared norm `0..=max_sq` (unused slots are computed too).
    pub fn weights_by_norm_sq(&self, d: usize, max_sq: i64, used: Option<&[bool]>) -> Vec<f64> {
        (0..=max_sq)
            .into_par_iter()
            .map(|s| {
                if let Some(u) = used {
                    if !u[s as usize] {
                        return 0.0;
                    }
                }
                let n = (s as f64).sqrt();
                match *self {
                    Weighting::Fixed { r } => {
                        let c = ball_fourier_unchecked(d, r, n);
                        c * c
                    }
                    Weighting::Radial { a, b } => radial_weight_unchecked(d, a, b, n),
                }
            })
            .collect()
    }

    /// `C` with `w(m) ≤ C |m|^{-d-1}` for `|m| ≥ 1`.
    pub fn envelope(&self, d: usize) -> f64 {
        match *self {
            Weighting::Fixed { r } => fixed_envelope(d, r),
            Weighting::Radial { a, b } => radial_envelope(d, a, b),
        }
    }

    /// `w(0)`: the squared ball volume, or its r-integral.
    pub fn zero_weight(&self, d: usize) -> f64 {
        let v = unit_ball_volume(d);
        match *self {
            Weighting::Fixed { r } => (v * r.powi(d as i32)).powi(2),
            Weighting::Radial { a, b } => {
                let e = 2 * d as i32 + 1;
                v * v * (b.powi(e) - a.powi(e)) / e as f64
            }
        }
    }

    /// `|B_r|`, or `∫_a^b |B_r| dr`.
    pub fn ball_measure(&self, d: usize) -> f64 {
        let v = unit_ball_volume(d);
        match *self {
            Weighting::Fixed { r } => v * r.powi(d as i32),
            Weighting::Radial { a, b } => {
                let e = d as i32 + 1;
                v * (b.powi(e) - a.powi(e)) / e as f64
            }
        }
    }
}

/// All `m ∈ Z^d` with `0 < |m| ≤ M`, grouped into shells of equal `|m|²`.
#[derive(Clone, Debug)]
pub struct FrequencySet {
    dim: usize,
    cutoff: f64,
    shells: BTreeMap<i64, Vec<Freq>>,
}

impl FrequencySet {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn shells(&self) -> &BTreeMap<i64, Vec<Freq>> {
        &self.shells
    }

    pub fn len(&self) -> usize {
        self.shells.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.shells.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Freq> {
        self.shells.values().flatten()
    }
}

/// Number of frequencies in the box `|m_i| ≤ M`, an upper bound on the ball count.
fn box_count(d: usize, m_max: f64) -> u64 {
    let side = 2 * m_max.floor() as u64 + 1;
    side.saturating_pow(d as u32)
}

pub fn enumerate_lattice(d: usize, m_max: f64) -> Result<FrequencySet> {
    enumerate_lattice_with_budget(d, m_max, DEFAULT_FREQ_BUDGET)
}

pub fn enumerate_lattice_with_budget(d: usize, m_max: f64, budget: u64) -> Result<FrequencySet> {
    check_dim(d)?;
    if !(m_max >= 1.0) || !m_max.is_finite() {
        return Err(Error::InvalidParameter {
            name: "M_max",
            value: m_max,
            reason: "cutoff must be at least 1",
        });
    }
    let needed = box_count(d, m_max);
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    let k = m_max.floor() as i64;
    let lim = (m_max * m_max).floor() as i64;
    let mut shells: BTreeMap<i64, Vec<Freq>> = BTreeMap::new();
    let r = |i: usize| if i < d { -k..=k } else { 0..=0 };
    for a in r(0) {
        for b in r(1) {
            for c in r(2) {
                let m = [a, b, c];
                let s = norm_sq(&m);
                if s > 0 && s <= lim {
                    shells.entry(s).or_default().push(m);
                }
            }
        }
    }
    Ok(FrequencySet {
        dim: d,
        cutoff: m_max,
        shells,
    })
}

/// Per-shell weights `w(m)` keyed by `|m|²`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectralWeightTable {
    pub dim: usize,
    pub weighting: Weighting,
    pub entries: BTreeMap<i64, f64>,
}

impl SpectralWeightTable {
    pub fn build(freqs: &FrequencySet, weighting: Weighting) -> Result<Self> {
        weighting.validate()?;
        let d = freqs.dim();
        let keys: Vec<i64> = freqs.shells().keys().copied().collect();
        let vals: Vec<f64> = keys
            .par_iter()
            .map(|&s| {
                let n = (s as f64).sqrt();
                match weighting {
                    Weighting::Fixed { r } => ball_fourier_unchecked(d, r, n).powi(2),
                    Weighting::Radial { a, b } => radial_weight_unchecked(d, a, b, n),
                }
            })
            .collect();
        Ok(Self {
            dim: d,
            weighting,
            entries: keys.into_iter().zip(vals).collect(),
        })
    }

    pub fn weight(&self, m_sq: i64) -> Option<f64> {
        self.entries.get(&m_sq).copied()
    }

    /// CSV with columns `m_sq,weight,tail_bound_flag`; the flag reports whether
    /// the weight lies within the analytic `C |m|^{-d-1}` envelope.
    pub fn to_csv(&self) -> String {
        let c = self.weighting.envelope(self.dim);
        let mut s = String::from("m_sq,weight,tail_bound_flag\n");
        for (&k, &w) in &self.entries {
            let env = c * (k as f64).powf(-(self.dim as f64 + 1.0) / 2.0);
            let _ = writeln!(s, "{k},{w:e},{}", w <= env * (1.0 + 1e-12));
        }
        s
    }
}

/// `N^{-1} Σ_j α_j e^{2πi m·z_j}`.
pub fn exp_sum(ps: &WeightedPointSet, m: &Freq) -> Complex64 {
    let mut re = Accumulator::new();
    let mut im = Accumulator::new();
    for (p, &a) in ps.points().iter().zip(ps.weights()) {
        let mut ph = 0.0;
        for (x, &k) in p.coords().iter().zip(m.iter()) {
            ph += x * k as f64;
        }
        // reduce before multiplying by 2π to keep the phase accurate for large m
        let ph = 2.0 * PI * (ph - ph.round());
        re.add(a * ph.cos());
        im.add(a * ph.sin());
    }
    let n = ps.len() as f64;
    Complex64::new(re.value() / n, im.value() / n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::{grid_points, TorusPoint};

    #[test]
    fn ball_fourier_examples() {
        let v = ball_fourier(1, 0.25, 1.0).unwrap();
        assert!((v - 1.0 / PI).abs() < 1e-15);
        let v = ball_fourier(2, 0.3, 0.0).unwrap();
        assert!((v - PI * 0.09).abs() < 1e-15);
        let r = 0.2;
        let v = ball_fourier(3, r, 1e-4).unwrap();
        let vol = 4.0 / 3.0 * PI * r * r * r;
        assert!(((v - vol) / vol).abs() < 1e-6);
        assert!(ball_fourier(1, 0.5, 1.0).is_err());
        assert!(ball_fourier(4, 0.2, 1.0).is_err());
    }

    #[test]
    fn ball_fourier_matches_bessel_forms() {
        let r = 0.17;
        for &n in &[0.5, 1.0, 3.7, 20.0, 150.0] {
            let t = 2.0 * PI * r * n;
            let d1 = t.sin() / (PI * n);
            assert!((ball_fourier(1, r, n).unwrap() - d1).abs() < 1e-14);
            let d2 = r * crate::bessel::j1(t) / n;
            assert!((ball_fourier(2, r, n).unwrap() - d2).abs() < 1e-14);
            let d3 = (t.sin() - t * t.cos()) / (2.0 * PI * PI * n.powi(3));
            assert!((ball_fourier(3, r, n).unwrap() - d3).abs() < 1e-13);
        }
    }

    #[test]
    fn radial_weight_d1_antiderivative() {
        let (a, b) = (0.1, 0.4);
        for m in [1.0, 2.0, 7.0, 64.0, 333.0, 1000.0] {
            let g = |r: f64| r / 2.0 - (4.0 * PI * r * m).sin() / (8.0 * PI * m);
            let exact = (g(b) - g(a)) / (PI * PI * m * m);
            let q = radial_weight_quadrature(1, a, b, m);
            assert!(((q - exact) / exact).abs() < 1e-10, "m={m}: {q} vs {exact}");
            let w = radial_weight(1, a, b, m).unwrap();
            assert!(((w - exact) / exact).abs() < 1e-12);
        }
    }

    #[test]
    fn radial_weight_d3_closed_form_matches_quadrature() {
        for &(a, b) in &[(0.1, 0.4), (0.01, 0.2), (0.3, 0.45)] {
            for m in [0.5, 1.0, 3.0f64.sqrt(), 10.0, 77.0, 400.0] {
                let q = radial_weight_quadrature(3, a, b, m);
                let w = radial_weight(3, a, b, m).unwrap();
                assert!(((w - q) / q).abs() < 1e-10, "a={a} m={m}: {w} vs {q}");
            }
        }
    }

    #[test]
    fn radial_weight_band_d1() {
        let prods: Vec<f64> = [8.0, 16.0, 32.0, 64.0]
            .iter()
            .map(|&m| radial_weight(1, 0.1, 0.4, m).unwrap() * m * m)
            .collect();
        let hi = prods.iter().cloned().fold(0.0, f64::max);
        let lo = prods.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(hi / lo < 3.0);
        for d in 1..=3 {
            let c = radial_envelope(d, 0.1, 0.4);
            for i in 1..300 {
                let n = i as f64 * 0.7 + 1.0;
                let w = radial_weight(d, 0.1, 0.4, n).unwrap();
                assert!(w > 0.0 && w <= c * n.powi(-(d as i32) - 1));
            }
        }
    }

    #[test]
    fn parseval_closure_brackets_volume() {
        // Σ_m |χ̂(m)|² = |B_r|; truncation leaves at most the envelope tail.
        for d in 1..=2 {
            let r = 0.2;
            let m_max = if d == 1 { 20000.0 } else { 300.0 };
            let f = enumerate_lattice(d, m_max).unwrap();
            let t = SpectralWeightTable::build(&f, Weighting::Fixed { r }).unwrap();
            let mut s = Accumulator::new();
            s.add(Weighting::Fixed { r }.zero_weight(d));
            for (k, ms) in f.shells() {
                s.add(t.weight(*k).unwrap() * ms.len() as f64);
            }
            let vol = unit_ball_volume(d) * r.powi(d as i32);
            let tail = fixed_envelope(d, r) * lattice_tail(d, m_max);
            assert!(s.value() <= vol + 1e-12 && s.value() + tail >= vol, "d={d}");
        }
    }

    #[test]
    fn envelopes_dominate() {
        for d in 1..=3 {
            for &r in &[0.05, 0.25, 0.45] {
                let c = fixed_envelope(d, r);
                for i in 1..4000 {
                    let n = 1.0 + i as f64 * 0.037;
                    let w = ball_fourier(d, r, n).unwrap().powi(2);
                    assert!(w <= c * n.powi(-(d as i32) - 1) * (1.0 + 1e-12), "d={d} r={r} n={n}");
                }
            }
        }
    }

    #[test]
    fn lattice_counts() {
        let f = enumerate_lattice(1, 3.0).unwrap();
        assert_eq!(f.len(), 6);
        let f = enumerate_lattice(2, 1.5).unwrap();
        assert_eq!(f.len(), 8);
        let f = enumerate_lattice(3, 10.0).unwrap();
        let mut brute = 0;
        for a in -10i64..=10 {
            for b in -10i64..=10 {
                for c in -10i64..=10 {
                    let s = a * a + b * b + c * c;
                    if s > 0 && s <= 100 {
                        brute += 1;
                    }
                }
            }
        }
        assert_eq!(f.len(), brute);
        for (&s, ms) in f.shells() {
            assert!(ms.iter().all(|m| norm_sq(m) == s));
        }
        assert!(matches!(
            enumerate_lattice_with_budget(3, 100.0, 1000),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn exp_sum_on_grid() {
        for (h, d) in [(3usize, 1usize), (4, 2), (2, 3)] {
            let g = grid_points(h, d).unwrap();
            let hh = h as i64;
            let lim = 3 * hh;
            let r = |i: usize| if i < d { -lim..=lim } else { 0..=0 };
            for a in r(0) {
                for b in r(1) {
                    for c in r(2) {
                        let m = [a, b, c];
                        let e = exp_sum(&g, &m);
                        let on = m.iter().all(|k| k % hh == 0);
                        let want = if on { 1.0 } else { 0.0 };
                        assert!((e.re - want).abs() < 1e-12 && e.im.abs() < 1e-12, "{m:?}");
                    }
                }
            }
        }
        let one = WeightedPointSet::unit_weights(vec![TorusPoint::origin(2).unwrap()]).unwrap();
        assert_eq!(exp_sum(&one, &[5, -3, 0]), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn cutoff_meets_tail() {
        for d in 1..=3 {
            let m = cutoff_for_tail(d, 2.0, 1e-6, 4.0);
            assert!(2.0 * lattice_tail(d, m) <= 1e-6);
            assert!(m >= 4.0);
        }
    }
}
