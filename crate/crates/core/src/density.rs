//! Densities represented by finitely many Fourier coefficients.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;
use crate::spectral::{ball_fourier_unchecked, neg, norm_sq, Freq};
use crate::sum::Accumulator;
use crate::torus::{check_dim, unit_ball_volume, wrap, MAX_DIM};

/// Relative tolerance for the Hermitian-symmetry check.
const HERMITIAN_TOL: f64 = 1e-12;

/// Radial transition of the bump profile on `1 ≤ |ξ| ≤ 2`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transition {
    /// `C¹` cubic smoothstep.
    Cubic,
    /// `C²` quintic smoothstep.
    #[default]
    Quintic,
    /// `C³` septic smoothstep.
    Septic,
}

impl Transition {
    /// Rises from 0 at `t = 0` to 1 at `t = 1`.
    fn step(self, t: f64) -> f64 {
        let t = t.clamp(0.0, 1.0);
        match self {
            Transition::Cubic => t * t * (3.0 - 2.0 * t),
            Transition::Quintic => t * t * t * (t * (6.0 * t - 15.0) + 10.0),
            Transition::Septic => {
                let t4 = t * t * t * t;
                t4 * (35.0 + t * (-84.0 + t * (70.0 - 20.0 * t)))
            }
        }
    }
}

/// Radial Fourier profile: 1 on `|ξ| ≤ 1`, 0 on `|ξ| ≥ 2`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BumpProfile {
    pub transition: Transition,
}

impl BumpProfile {
    pub fn eval(&self, xi: f64) -> f64 {
        let x = xi.abs();
        if x <= 1.0 {
            1.0
        } else if x >= 2.0 {
            0.0
        } else {
            1.0 - self.transition.step(x - 1.0)
        }
    }
}

/// How a density was built.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Recipe {
    Constant { c: f64 },
    SingleMode { k: Vec<i64>, re: f64, im: f64 },
    PeriodizedBump { m: f64, profile: BumpProfile },
    Scaled { h: usize, inner: Box<Recipe> },
    Dvp { n: usize },
    Fejer { n: usize, center: Vec<f64> },
    HolderSample { beta: f64, k0: u32, top: u32, offset: f64, holder_constant: f64 },
    RandomTrig { bandwidth: i64, seed: u64 },
    Custom,
}

/// Norms attached to a density once computed.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DeclaredNorms {
    pub l2: Option<f64>,
    pub lp: Vec<(f64, f64)>,
    pub morrey: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityField {
    dim: usize,
    coeffs: BTreeMap<Freq, Complex64>,
    recipe: Recipe,
    real: bool,
    nonneg: bool,
    pub declared_norms: DeclaredNorms,
}

impl DensityField {
    /// Builds a density from raw coefficients; zeros are dropped.
    pub fn new(dim: usize, coeffs: BTreeMap<Freq, Complex64>, recipe: Recipe) -> Result<Self> {
        check_dim(dim)?;
        for m in coeffs.keys() {
            if m[dim..].iter().any(|&k| k != 0) {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: MAX_DIM,
                });
            }
        }
        let coeffs: BTreeMap<Freq, Complex64> =
            coeffs.into_iter().filter(|(_, c)| c.norm_sqr() > 0.0).collect();
        let scale = coeffs.values().map(|c| c.norm()).fold(0.0, f64::max);
        let real = coeffs.iter().all(|(m, c)| {
            let partner = coeffs.get(&neg(m)).copied().unwrap_or_default();
            (c - partner.conj()).norm() <= HERMITIAN_TOL * scale
        });
        Ok(Self {
            dim,
            coeffs,
            recipe,
            real,
            nonneg: false,
            declared_norms: DeclaredNorms::default(),
        })
    }

    /// Marks the density as known to be pointwise non-negative.
    fn certified_nonneg(mut self) -> Self {
        self.nonneg = self.real;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coeffs(&self) -> &BTreeMap<Freq, Complex64> {
        &self.coeffs
    }

    pub fn recipe(&self) -> &Recipe {
        &self.recipe
    }

    /// Coefficients satisfy `f̂(-m) = conj f̂(m)`.
    pub fn is_real(&self) -> bool {
        self.real
    }

    /// Pointwise non-negativity is guaranteed by construction.
    pub fn is_nonneg(&self) -> bool {
        self.nonneg
    }

    pub fn require_real(&self) -> Result<()> {
        if self.real {
            Ok(())
        } else {
            Err(Error::NonRealDensity)
        }
    }

    pub fn coef(&self, m: &Freq) -> Complex64 {
        self.coeffs.get(m).copied().unwrap_or_default()
    }

    /// `f̂(0)`, the mean of the density.
    pub fn mean(&self) -> Complex64 {
        self.coef(&[0; MAX_DIM])
    }

    /// Largest `|m|` with a nonzero coefficient.
    pub fn bandwidth(&self) -> f64 {
        self.coeffs
            .keys()
            .map(|m| (norm_sq(m) as f64).sqrt())
            .fold(0.0, f64::max)
    }

    /// Largest `|m_i|` over all coefficients and axes.
    pub fn max_component(&self) -> i64 {
        self.coeffs
            .keys()
            .flat_map(|m| m.iter().map(|k| k.abs()))
            .max()
            .unwrap_or(0)
    }

    /// `Σ |f̂(m)|`, a bound on `sup |f|`.
    pub fn coeff_l1(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm()).collect::<Accumulator>().value()
    }

    /// `‖f‖₂²` by Parseval.
    pub fn l2_sq(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm_sqr()).collect::<Accumulator>().value()
    }

    pub fn scaled_by(&self, t: f64) -> DensityField {
        let mut out = self.clone();
        for c in out.coeffs.values_mut() {
            *c *= t;
        }
        out.nonneg = self.nonneg && t >= 0.0;
        out.recipe = Recipe::Custom;
        out.declared_norms = DeclaredNorms::default();
        out
    }

    pub fn evaluator(&self) -> Evaluator {
        Evaluator::new(self)
    }

    /// Real part of `f(x)`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.evaluator().eval(x).re
    }

    /// CSV rows `m_1,...,m_d,re,im`.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for i in 1..=self.dim {
            let _ = write!(s, "m_{i},");
        }
        s.push_str("re,im\n");
        for (m, c) in &self.coeffs {
            for k in &m[..self.dim] {
                let _ = write!(s, "{k},");
            }
            let _ = writeln!(s, "{:?},{:?}", c.re, c.im);
        }
        s
    }

    /// JSON sidecar with the recipe and flags.
    pub fn sidecar(&self) -> serde_json::Value {
        serde_json::json!({
            "dim": self.dim,
            "recipe": self.recipe,
            "real": self.real,
            "nonneg": self.nonneg,
            "declared_norms": self.declared_norms,
        })
    }

    pub fn from_csv(csv: &str, sidecar: &serde_json::Value) -> Result<Self> {
        let dim = sidecar["dim"]
            .as_u64()
            .ok_or_else(|| Error::Parse("sidecar lacks dim".into()))? as usize;
        check_dim(dim)?;
        let recipe: Recipe = serde_json::from_value(sidecar["recipe"].clone())?;
        let mut coeffs = BTreeMap::new();
        for line in csv.lines().skip(1).filter(|l| !l.trim().is_empty()) {
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != dim + 2 {
                return Err(Error::Parse(format!("bad coefficient row {line:?}")));
            }
            let mut m = [0i64; MAX_DIM];
            for i in 0..dim {
                m[i] = f[i].parse().map_err(|e| Error::Parse(format!("{e}")))?;
            }
            let re: f64 = f[dim].parse().map_err(|e| Error::Parse(format!("{e}")))?;
            let im: f64 = f[dim + 1].parse().map_err(|e| Error::Parse(format!("{e}")))?;
            coeffs.insert(m, Complex64::new(re, im));
        }
        let mut out = Self::new(dim, coeffs, recipe)?;
        out.nonneg = out.real && sidecar["nonneg"].as_bool().unwrap_or(false);
        Ok(out)
    }
}

fn freq(dim: usize, k: &[i64]) -> Result<Freq> {
    if k.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: k.len(),
        });
    }
    let mut m = [0; MAX_DIM];
    m[..dim].copy_from_slice(k);
    Ok(m)
}

pub fn constant_density(c: f64, d: usize) -> Result<DensityField> {
    let mut coeffs = BTreeMap::new();
    coeffs.insert([0; MAX_DIM], Complex64::new(c, 0.0));
    let f = DensityField::new(d, coeffs, Recipe::Constant { c })?;
    Ok(if c >= 0.0 { f.certified_nonneg() } else { f })
}

/// `amplitude · e^{2πi k·x}`.
pub fn single_mode(k: &[i64], amplitude: Complex64) -> Result<DensityField> {
    let d = k.len();
    let m = freq(d, k)?;
    let mut coeffs = BTreeMap::new();
    coeffs.insert(m, amplitude);
    DensityField::new(
        d,
        coeffs,
        Recipe::SingleMode {
            k: k.to_vec(),
            re: amplitude.re,
            im: amplitude.im,
        },
    )
}

/// Visits every `m` in the box `|m_i| ≤ k`.
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

/// `F(x) = Σ_m φ̂(m/M) e^{2πi m·x}`, the periodization of `M^d φ(Mx)`.
pub fn periodized_bump(m_band: f64, profile: BumpProfile, d: usize) -> Result<DensityField> {
    check_dim(d)?;
    if !(m_band >= 1.0) {
        return Err(Error::InvalidParameter {
            name: "M",
            value: m_band,
            reason: "bandwidth must be at least 1",
        });
    }
    let k = (2.0 * m_band).floor() as i64;
    let mut coeffs = BTreeMap::new();
    for_box(d, k, |m| {
        let v = profile.eval((norm_sq(&m) as f64).sqrt() / m_band);
        if v > 0.0 {
            coeffs.insert(m, Complex64::new(v, 0.0));
        }
    });
    DensityField::new(d, coeffs, Recipe::PeriodizedBump { m: m_band, profile })
}

/// `f(x) = F(Hx)`: coefficients move from `m` to `Hm`.
pub fn scale_density(f: &DensityField, h: usize) -> Result<DensityField> {
    if h == 0 {
        return Err(Error::InvalidParameter {
            name: "H",
            value: 0.0,
            reason: "scale must be a positive integer",
        });
    }
    let hh = h as i64;
    let coeffs = f
        .coeffs
        .iter()
        .map(|(m, c)| ([m[0] * hh, m[1] * hh, m[2] * hh], *c))
        .collect();
    let mut out = DensityField::new(
        f.dim,
        coeffs,
        Recipe::Scaled {
            h,
            inner: Box::new(f.recipe.clone()),
        },
    )?;
    out.nonneg = f.nonneg;
    Ok(out)
}

/// Tensor product of 1-d de la Vallée Poussin kernels: 1 on `|m_i| ≤ n`,
/// linear down to 0 at `|m_i| = 2n`.
pub fn dvp_density(n: usize, d: usize) -> Result<DensityField> {
    check_dim(d)?;
    if n == 0 {
        return Err(Error::InvalidParameter {
            name: "n",
            value: 0.0,
            reason: "degree must be at least 1",
        });
    }
    let nf = n as f64;
    let axis = |k: i64| -> f64 {
        let a = k.unsigned_abs() as f64;
        if a <= nf {
            1.0
        } else {
            ((2.0 * nf - a) / nf).max(0.0)
        }
    };
    let mut coeffs = BTreeMap::new();
    for_box(d, 2 * n as i64, |m| {
        let v: f64 = (0..d).map(|i| axis(m[i])).product();
        if v > 0.0 {
            coeffs.insert(m, Complex64::new(v, 0.0));
        }
    });
    DensityField::new(d, coeffs, Recipe::Dvp { n })
}

/// Tensor Fejér kernel of order `n` centred at `center`: non-negative, mean 1,
/// `f̂(m) = Π max(0, 1 - |m_i|/n) e^{-2πi m·c}`.
pub fn fejer_density(n: usize, center: &[f64]) -> Result<DensityField> {
    let d = check_dim(center.len())?;
    if n == 0 {
        return Err(Error::InvalidParameter {
            name: "n",
            value: 0.0,
            reason: "order must be at least 1",
        });
    }
    let nf = n as f64;
    let mut coeffs = BTreeMap::new();
    for_box(d, n as i64 - 1, |m| {
        let mut v = 1.0;
        let mut ph = 0.0;
        for i in 0..d {
            v *= 1.0 - m[i].unsigned_abs() as f64 / nf;
            ph += m[i] as f64 * center[i];
        }
        let ph = -2.0 * PI * (ph - ph.round());
        coeffs.insert(m, Complex64::from_polar(v, ph));
    });
    let f = DensityField::new(
        d,
        coeffs,
        Recipe::Fejer {
            n,
            center: center.to_vec(),
        },
    )?;
    Ok(f.certified_nonneg())
}

/// Real trigonometric polynomial with random coefficients on `|m_i| ≤ K`
/// (Hermitian pairs, modulus decaying like `(1 + |m|)^{-1}`), mean 1.
pub fn random_real_trig(d: usize, bandwidth: i64, seed: u64) -> Result<DensityField> {
    check_dim(d)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coeffs = BTreeMap::new();
    for_box(d, bandwidth, |m| {
        if coeffs.contains_key(&m) {
            return;
        }
        if m == [0; MAX_DIM] {
            coeffs.insert(m, Complex64::new(1.0, 0.0));
            return;
        }
        let scale = 1.0 / (1.0 + (norm_sq(&m) as f64).sqrt());
        let c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * scale * 0.5;
        coeffs.insert(m, c);
        coeffs.insert(neg(&m), c.conj());
    });
    DensityField::new(d, coeffs, Recipe::RandomTrig { bandwidth, seed })
}

/// A band-limited Hölder test function and its certified constants.
#[derive(Clone, Debug)]
pub struct HolderDensity {
    pub field: DensityField,
    /// `L` with `|f(x) - f(y)| ≤ L |x - y|^β` on the torus.
    pub holder_constant: f64,
    /// Constant added to make the function non-negative.
    pub offset: f64,
}

/// Shape of the lacunary Hölder construction
/// `W(x) = Σ_{k=k0}^{top} 2^{-β(k-k0)} cos(2π 2^k x)` per axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderShape {
    /// Lowest octave; `2^{k0}` is the coarsest frequency.
    pub k0: u32,
    /// Highest octave; `2^{top}` is the bandwidth.
    pub top: u32,
}

impl HolderShape {
    pub fn default_for(d: usize) -> Self {
        let top = match d {
            1 => 12,
            2 => 6,
            _ => 4,
        };
        Self { k0: 2, top }
    }
}

/// Sum over axes of a lacunary cosine series; roughness `β` holds uniformly
/// down to scale `2^{-top}`.
pub fn holder_density(beta: f64, d: usize, shape: HolderShape) -> Result<HolderDensity> {
    check_dim(d)?;
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "beta",
            value: beta,
            reason: "Hölder exponent must lie in (0, 1]",
        });
    }
    if shape.top < shape.k0 || shape.top > 20 {
        return Err(Error::InvalidParameter {
            name: "top",
            value: shape.top as f64,
            reason: "need k0 <= top <= 20",
        });
    }
    let terms: Vec<(f64, f64)> = (shape.k0..=shape.top)
        .map(|k| (2f64.powf(-beta * (k - shape.k0) as f64), 2f64.powi(k as i32)))
        .collect();

    // certified lower bound on min W: grid minimum minus Lipschitz slack
    let lip: f64 = terms.iter().map(|(a, nu)| 2.0 * PI * nu * a).sum();
    let n = 1usize << (shape.top + 6);
    let grid_min = (0..n)
        .into_par_iter()
        .map(|i| {
            let x = i as f64 / n as f64;
            terms
                .iter()
                .map(|(a, nu)| a * (2.0 * PI * ((nu * x) % 1.0)).cos())
                .sum::<f64>()
        })
        .reduce(|| f64::INFINITY, f64::min);
    let w_min = grid_min - lip * 0.5 / n as f64;
    let offset = -(d as f64) * w_min.min(0.0);

    let mut coeffs = BTreeMap::new();
    coeffs.insert([0; MAX_DIM], Complex64::new(offset, 0.0));
    for i in 0..d {
        for &(a, nu) in &terms {
            let mut m = [0i64; MAX_DIM];
            m[i] = nu as i64;
            coeffs.insert(m, Complex64::new(0.5 * a, 0.0));
            coeffs.insert(neg(&m), Complex64::new(0.5 * a, 0.0));
        }
    }
    let holder_constant = lacunary_holder_constant(beta, &terms) * (d as f64).powf(1.0 - beta / 2.0);
    let field = DensityField::new(
        d,
        coeffs,
        Recipe::HolderSample {
            beta,
            k0: shape.k0,
            top: shape.top,
            offset,
            holder_constant,
        },
    )?
    .certified_nonneg();
    Ok(HolderDensity {
        field,
        holder_constant,
        offset,
    })
}

/// `sup_{0 < h ≤ 1/2} h^{-β} Σ a_k min(2, 2π ν_k h)`, which bounds the
/// Hölder quotient of `Σ a_k cos(2π ν_k x)`.
fn lacunary_holder_constant(beta: f64, terms: &[(f64, f64)]) -> f64 {
    // breakpoints where a term saturates
    let mut bps: Vec<f64> = terms.iter().map(|(_, nu)| 1.0 / (PI * nu)).filter(|&h| h < 0.5).collect();
    bps.push(0.5);
    bps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let g = |h: f64| -> f64 {
        terms
            .iter()
            .map(|(a, nu)| a * (2.0f64).min(2.0 * PI * nu * h))
            .sum::<f64>()
            / h.powf(beta)
    };
    let mut best = 0.0f64;
    let mut lo = 0.0;
    for &hi in &bps {
        // on (lo, hi]: g = A h^{1-β} + B h^{-β}
        let mid = 0.5 * (lo + hi);
        let (mut a, mut b) = (0.0, 0.0);
        for (c, nu) in terms {
            if 2.0 * PI * nu * mid < 2.0 {
                a += c * 2.0 * PI * nu;
            } else {
                b += c * 2.0;
            }
        }
        best = best.max(g(hi));
        if lo > 0.0 {
            best = best.max(g(lo));
        } else if beta >= 1.0 {
            best = best.max(a);
        }
        if beta < 1.0 && a > 0.0 && b > 0.0 {
            let hc = beta * b / ((1.0 - beta) * a);
            if hc > lo && hc < hi {
                best = best.max(g(hc));
            }
        }
        lo = hi;
    }
    best * (1.0 + 1e-12)
}

/// Pointwise evaluation through per-axis phasor tables.
#[derive(Clone, Debug)]
pub struct Evaluator {
    dim: usize,
    kmax: [i64; MAX_DIM],
    freqs: Vec<Freq>,
    vals: Vec<Complex64>,
}

impl Evaluator {
    fn new(f: &DensityField) -> Self {
        Self::from_terms(f.dim, f.coeffs.iter().map(|(m, c)| (*m, *c)).collect())
    }

    /// Evaluator for `Σ c_m e^{2πi m·x}` over the given terms.
    pub fn from_terms(dim: usize, terms: Vec<(Freq, Complex64)>) -> Self {
        let mut kmax = [0i64; MAX_DIM];
        for (m, _) in &terms {
            for i in 0..MAX_DIM {
                kmax[i] = kmax[i].max(m[i].abs());
            }
        }
        let (freqs, vals) = terms.into_iter().unzip();
        Self {
            dim,
            kmax,
            freqs,
            vals,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    /// `f(x)` as a complex number.
    pub fn eval(&self, x: &[f64]) -> Complex64 {
        let table_len: i64 = (0..self.dim).map(|i| 2 * self.kmax[i] + 1).sum();
        let mut re = Accumulator::new();
        let mut im = Accumulator::new();
        if (self.freqs.len() as i64) < table_len {
            // sparse spectrum: one phase per term
            for (m, c) in self.freqs.iter().zip(&self.vals) {
                let mut ph = 0.0;
                for i in 0..self.dim {
                    ph += m[i] as f64 * x[i];
                }
                let z = c * Complex64::from_polar(1.0, 2.0 * PI * (ph - ph.round()));
                re.add(z.re);
                im.add(z.im);
            }
            return Complex64::new(re.value(), im.value());
        }
        SCRATCH.with(|cell| {
            let mut buf = cell.borrow_mut();
            buf.clear();
            let mut offs = [0usize; MAX_DIM];
            for i in 0..self.dim {
                offs[i] = buf.len();
                buf.extend(phasor_table(x[i], self.kmax[i]));
            }
            for (m, c) in self.freqs.iter().zip(&self.vals) {
                let mut z = *c;
                for i in 0..self.dim {
                    z *= buf[offs[i] + (m[i] + self.kmax[i]) as usize];
                }
                re.add(z.re);
                im.add(z.im);
            }
        });
        Complex64::new(re.value(), im.value())
    }
}

thread_local! {
    static SCRATCH: std::cell::RefCell<Vec<Complex64>> = const { std::cell::RefCell::new(Vec::new()) };
}

/// `e^{2πi k x}` for `k = -K..=K`, indexed by `k + K`.
pub(crate) fn phasor_table(x: f64, kmax: i64) -> Vec<Complex64> {
    let k = kmax as usize;
    let mut t = vec![Complex64::new(1.0, 0.0); 2 * k + 1];
    let x = x - x.round();
    let base = Complex64::from_polar(1.0, 2.0 * PI * x);
    let mut z = Complex64::new(1.0, 0.0);
    for j in 1..=k {
        z = if j % 64 == 0 {
            let ph = j as f64 * x;
            Complex64::from_polar(1.0, 2.0 * PI * (ph - ph.round()))
        } else {
            z * base
        };
        t[k + j] = z;
        t[k - j] = z.conj();
    }
    t
}

/// Real parts of `f` on the tensor grid `x = -1/2 + j/n`, row-major.
pub fn eval_grid(f: &DensityField, n: usize) -> Vec<f64> {
    eval_grid_complex(f, n).into_iter().map(|z| z.re).collect()
}

/// `f` on the tensor grid `x = -1/2 + j/n`, computed axis by axis.
pub fn eval_grid_complex(f: &DensityField, n: usize) -> Vec<Complex64> {
    let d = f.dim;
    let k = f.max_component();
    let w = (2 * k + 1) as usize;
    // dense coefficient box
    let mut shape = vec![w; d];
    let mut data = vec![Complex64::default(); w.pow(d as u32)];
    for (m, c) in &f.coeffs {
        let mut idx = 0;
        for i in 0..d {
            idx = idx * w + (m[i] + k) as usize;
        }
        data[idx] = *c;
    }
    // e^{2πi m x_j}, table[j][m + K]
    let table: Vec<Vec<Complex64>> = (0..n)
        .map(|j| phasor_table(-0.5 + j as f64 / n as f64, k))
        .collect();
    for axis in 0..d {
        let outer: usize = shape[..axis].iter().product();
        let inner: usize = shape[axis + 1..].iter().product();
        let len = shape[axis];
        let mut next = vec![Complex64::default(); outer * n * inner];
        next.par_chunks_mut(n * inner).enumerate().for_each(|(o, out)| {
            for (j, row) in table.iter().enumerate() {
                for t in 0..inner {
                    let mut s = Complex64::default();
                    for (q, e) in row.iter().enumerate().take(len) {
                        s += data[(o * len + q) * inner + t] * e;
                    }
                    out[j * inner + t] = s;
                }
            }
        });
        data = next;
        shape[axis] = n;
    }
    data
}

/// A norm with a grid-refinement error estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub value: f64,
    pub error_estimate: f64,
    pub grid: usize,
}

fn grid_lp(f: &DensityField, p: f64, n: usize) -> f64 {
    let vals = eval_grid_complex(f, n);
    let s: Accumulator = vals.iter().map(|v| v.norm().powf(p)).collect();
    (s.value() / vals.len() as f64).powf(1.0 / p)
}

/// `‖f‖_p`; exact by Parseval at `p = 2`, tensor-grid quadrature otherwise.
pub fn lp_norm(f: &DensityField, p: f64) -> Result<NormEstimate> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::InvalidParameter {
            name: "p",
            value: p,
            reason: "need 1 <= p < inf",
        });
    }
    if f.coeffs.is_empty() {
        return Ok(NormEstimate {
            value: 0.0,
            error_estimate: 0.0,
            grid: 0,
        });
    }
    if p == 2.0 {
        return Ok(NormEstimate {
            value: f.l2_sq().sqrt(),
            error_estimate: 0.0,
            grid: 0,
        });
    }
    let base = 4 * (f.max_component() as usize + 1);
    let coarse = grid_lp(f, p, base);
    let fine = grid_lp(f, p, 2 * base);
    Ok(NormEstimate {
        value: fine,
        error_estimate: (fine - coarse).abs(),
        grid: 2 * base,
    })
}

/// `‖f‖_p` on an explicit `n`-point-per-axis grid.
pub fn lp_norm_on_grid(f: &DensityField, p: f64, n: usize) -> f64 {
    grid_lp(f, p, n)
}

/// Search grid for the Morrey supremum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MorreyGrid {
    pub centers_per_axis: usize,
    pub radii: usize,
    pub r_min: f64,
}

impl MorreyGrid {
    pub fn default_for(d: usize) -> Self {
        Self {
            centers_per_axis: if d == 1 { 256 } else { 32 },
            radii: 48,
            r_min: 1e-3,
        }
    }

    /// Coarser search for signed densities, whose ball integrals need
    /// quadrature of `|f|`.
    pub fn quadrature_default(d: usize) -> Self {
        Self {
            centers_per_axis: if d == 1 { 256 } else { 16 },
            radii: 32,
            r_min: 1e-3,
        }
    }

    /// Doubles both grids; the refined grid contains the old nodes.
    pub fn refined(&self) -> Self {
        Self {
            centers_per_axis: 2 * self.centers_per_axis,
            radii: 2 * self.radii - 1,
            r_min: self.r_min,
        }
    }

    fn radii_list(&self) -> Vec<f64> {
        let r_max = 0.5 * (1.0 - 1e-9);
        let n = self.radii.max(2);
        let q = (self.r_min / r_max).powf(1.0 / (n - 1) as f64);
        (0..n).rev().map(|i| r_max * q.powi(i as i32)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MorreyEstimate {
    /// Lower estimate of `sup_{z,r} r^{-λ} ∫_{B(z,r)} |f|`.
    pub value: f64,
    pub center: Vec<f64>,
    pub radius: f64,
    pub grid: MorreyGrid,
    /// Ball integrals were exact (non-negative `f`) rather than quadrature.
    pub exact_ball_integrals: bool,
}

/// Lower estimate of the Morrey norm `‖f‖_{1,λ}` by maximizing over a grid of
/// centres and radii.
pub fn morrey_norm(f: &DensityField, lambda: f64) -> Result<MorreyEstimate> {
    let grid = if f.nonneg || f.dim == 1 {
        MorreyGrid::default_for(f.dim)
    } else {
        MorreyGrid::quadrature_default(f.dim)
    };
    morrey_norm_on(f, lambda, grid)
}

pub fn morrey_norm_on(f: &DensityField, lambda: f64, grid: MorreyGrid) -> Result<MorreyEstimate> {
    let d = f.dim;
    if !(lambda > 0.0 && lambda <= d as f64) {
        return Err(Error::InvalidParameter {
            name: "lambda",
            value: lambda,
            reason: "need 0 < lambda <= d",
        });
    }
    f.require_real()?;
    let nc = grid.centers_per_axis.max(1);
    let radii = grid.radii_list();
    let ncent = nc.pow(d as u32);
    let exact = f.is_nonneg();
    let ev = f.evaluator();
    let best = (0..ncent)
        .into_par_iter()
        .map(|c| {
            let mut z = [0.0; MAX_DIM];
            let mut j = c;
            for i in (0..d).rev() {
                z[i] = -0.5 + (j % nc) as f64 / nc as f64;
                j /= nc;
            }
            let mut local = (f64::NEG_INFINITY, 0.0);
            let masses: Vec<f64> = if exact {
                radii.iter().map(|&r| ball_mass_spectral(f, &z, r)).collect()
            } else {
                ball_abs_masses(&ev, d, &z, &radii, f.max_component())
            };
            for (&r, &mass) in radii.iter().zip(&masses) {
                let v = mass / r.powf(lambda);
                if v > local.0 {
                    local = (v, r);
                }
            }
            (local.0, local.1, c)
        })
        .reduce(
            || (f64::NEG_INFINITY, 0.0, 0),
            |a, b| if b.0 > a.0 || (b.0 == a.0 && b.2 < a.2) { b } else { a },
        );
    let mut center = vec![0.0; d];
    let mut j = best.2;
    for i in (0..d).rev() {
        center[i] = -0.5 + (j % nc) as f64 / nc as f64;
        j /= nc;
    }
    Ok(MorreyEstimate {
        value: best.0,
        center,
        radius: best.1,
        grid,
        exact_ball_integrals: exact,
    })
}

/// Morrey norm of `f(x) = F(Hx)` in d = 1 from a prefix integral of `|F|`
/// over one period. Centres run over `resolution` points per period of `f`,
/// radii over multiples of its spacing. Lower estimate, like the grid search.
pub fn morrey_norm_dilated_1d(inner: &DensityField, h: usize, lambda: f64, resolution: usize) -> Result<MorreyEstimate> {
    if inner.dim != 1 {
        return Err(Error::UnsupportedDimension(inner.dim));
    }
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "lambda",
            value: lambda,
            reason: "need 0 < lambda <= d",
        });
    }
    if h == 0 || resolution < 2 {
        return Err(Error::InvalidParameter {
            name: "resolution",
            value: resolution as f64,
            reason: "need H >= 1 and at least two cells per period",
        });
    }
    inner.require_real()?;
    let t = resolution;
    let ev = inner.evaluator();
    let g = GaussLegendre::new(12);
    let cell: Vec<f64> = (0..t)
        .into_par_iter()
        .map(|i| {
            let a = i as f64 / t as f64 - 0.5;
            g.integrate(a, a + 1.0 / t as f64, |x| ev.eval(&[x]).re.abs())
        })
        .collect();
    let mut prefix = vec![0.0; t + 1];
    let mut acc = Accumulator::new();
    for i in 0..t {
        acc.add(cell[i]);
        prefix[i + 1] = acc.value();
    }
    let total = prefix[t];
    let ext = |i: i64| -> f64 {
        let q = i.div_euclid(t as i64);
        q as f64 * total + prefix[i.rem_euclid(t as i64) as usize]
    };
    let hf = h as f64;
    let kmax = (t * h).div_ceil(2) as i64 - 1;
    let best = (0..t as i64)
        .into_par_iter()
        .map(|i| {
            let mut local = (f64::NEG_INFINITY, 0.0, i);
            for k in 1..=kmax.max(1) {
                let r = k as f64 / (t as f64 * hf);
                let v = (ext(i + k) - ext(i - k)) / hf / r.powf(lambda);
                if v > local.0 {
                    local = (v, r, i);
                }
            }
            local
        })
        .reduce(
            || (f64::NEG_INFINITY, 0.0, 0),
            |a, b| if b.0 > a.0 || (b.0 == a.0 && b.2 < a.2) { b } else { a },
        );
    Ok(MorreyEstimate {
        value: best.0,
        center: vec![wrap((best.2 as f64 / t as f64 - 0.5) / hf)],
        radius: best.1,
        grid: MorreyGrid {
            centers_per_axis: t,
            radii: kmax.max(1) as usize,
            r_min: 1.0 / (t as f64 * hf),
        },
        exact_ball_integrals: false,
    })
}

/// `∫_{B(z,r)} f = Σ f̂(m) χ̂_{B_r}(m) e^{2πi m·z}`.
pub fn ball_mass_spectral(f: &DensityField, z: &[f64; MAX_DIM], r: f64) -> f64 {
    let d = f.dim;
    let mut acc = Accumulator::new();
    for (m, c) in &f.coeffs {
        let n = (norm_sq(m) as f64).sqrt();
        let mut ph = 0.0;
        for i in 0..d {
            ph += m[i] as f64 * z[i];
        }
        let e = Complex64::from_polar(1.0, 2.0 * PI * (ph - ph.round()));
        acc.add((c * e).re * ball_fourier_unchecked(d, r, n));
    }
    acc.value()
}

/// `∫_{B(z,r)} |f|` by Gauss–Legendre in Cartesian (d=1), polar (d=2) or
/// spherical (d=3) coordinates, with panels scaled to the bandwidth.
pub fn ball_abs_mass_quadrature(ev: &Evaluator, d: usize, z: &[f64; MAX_DIM], r: f64, kmax: i64) -> f64 {
    let panels = ((2.0 * r * kmax.max(1) as f64).ceil() as usize).max(1);
    let g = GaussLegendre::new(12);
    match d {
        1 => g.composite(z[0] - r, z[0] + r, 2 * panels, |x| ev.eval(&[x]).re.abs()),
        2 => {
            let ang = 4 * panels + 8;
            g.composite(0.0, r, panels, |rho| {
                rho * g.composite(0.0, 2.0 * PI, ang, |t| {
                    ev.eval(&[z[0] + rho * t.cos(), z[1] + rho * t.sin()]).re.abs()
                })
            })
        }
        3 => {
            let ang = 2 * panels + 4;
            g.composite(0.0, r, panels, |rho| {
                rho * rho
                    * g.composite(0.0, PI, ang, |th| {
                        th.sin()
                            * g.composite(0.0, 2.0 * PI, 2 * ang, |ph| {
                                let s = th.sin();
                                ev.eval(&[
                                    z[0] + rho * s * ph.cos(),
                                    z[1] + rho * s * ph.sin(),
                                    z[2] + rho * th.cos(),
                                ])
                                .re
                                .abs()
                            })
                    })
            })
        }
        _ => f64::NAN,
    }
}

/// `∫_{B(z,r)} |f|` for every radius in `radii` (ascending) from one radial
/// sweep: shell integrals accumulated between consecutive radii, with angular
/// panels proportional to the shell circumference.
pub fn ball_abs_masses(ev: &Evaluator, d: usize, z: &[f64; MAX_DIM], radii: &[f64], kmax: i64) -> Vec<f64> {
    let g = GaussLegendre::new(12);
    let g_short = GaussLegendre::new(6);
    let k = kmax.max(1) as f64;
    let shell = |rho: f64| -> f64 {
        match d {
            1 => ev.eval(&[z[0] + rho]).re.abs() + ev.eval(&[z[0] - rho]).re.abs(),
            2 => {
                let ang = (2.0 * PI * rho * k).ceil() as usize + 1;
                rho * g.composite(0.0, 2.0 * PI, ang, |t| {
                    ev.eval(&[z[0] + rho * t.cos(), z[1] + rho * t.sin()]).re.abs()
                })
            }
            3 => {
                let ang = (PI * rho * k).ceil() as usize + 1;
                rho * rho
                    * g.composite(0.0, PI, ang, |th| {
                        let s = th.sin();
                        s * g.composite(0.0, 2.0 * PI, 2 * ang, |ph| {
                            ev.eval(&[z[0] + rho * s * ph.cos(), z[1] + rho * s * ph.sin(), z[2] + rho * th.cos()])
                                .re
                                .abs()
                        })
                    })
            }
            _ => f64::NAN,
        }
    };
    let mut out = Vec::with_capacity(radii.len());
    let mut acc = Accumulator::new();
    let mut lo = 0.0;
    for &r in radii {
        let len = (r - lo) * k;
        if len < 0.25 {
            acc.add(g_short.integrate(lo, r, shell));
        } else {
            acc.add(g.composite(lo, r, (2.0 * len).ceil() as usize, shell));
        }
        out.push(acc.value());
        lo = r;
    }
    out
}

/// The constant `c` in `‖f‖_{1,d/2} ≤ c ‖f‖₂`: `√v_d`.
pub fn imbedding_constant(d: usize) -> f64 {
    unit_ball_volume(d).sqrt()
}
