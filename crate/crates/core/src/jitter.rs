//! Jittered sampling: one uniform point per cube, weights `α_j = f(z_j)`.
//!
//! `J(N, f, r)` is estimated by Monte Carlo and computed from the identity
//! `J = N⁻¹ |B_r| ‖f‖₂² - Σ_j ‖χ_{B_r} * (f χ_{E_j})‖₂²`, each cell term being a
//! lattice sum against the exact cube transform.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{holder_density, DensityField, HolderShape};
use crate::engine::PairwiseEvaluator;
use crate::error::{Error, Result};
use crate::spectral::{norm_sq, Freq, Weighting, DEFAULT_FREQ_BUDGET};
use crate::sum::Accumulator;
use crate::torus::{cube_partition, sample_jitter, PartitionCells, MAX_DIM};

pub const MIN_REPLICATES: usize = 100;
pub const DEFAULT_REPLICATES: usize = 2000;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct JitterEstimate {
    pub mc_value: Option<f64>,
    pub mc_stderr: Option<f64>,
    pub replicates: usize,
    pub closed_form: Option<f64>,
    /// Bound on `closed_form - J` (the truncated value is an upper bound).
    pub tail_bound: f64,
    pub cutoff: Option<f64>,
    /// `‖χ_B * (f χ_{E_j})‖₂²` per cell, when requested.
    pub cell_terms: Vec<f64>,
}

impl JitterEstimate {
    /// Combines the Monte Carlo fields of `self` with the closed-form fields of `other`.
    pub fn merge(mut self, other: JitterEstimate) -> JitterEstimate {
        if self.closed_form.is_none() {
            self.closed_form = other.closed_form;
            self.tail_bound = other.tail_bound;
            self.cutoff = other.cutoff;
            self.cell_terms = other.cell_terms;
        }
        if self.mc_value.is_none() {
            self.mc_value = other.mc_value;
            self.mc_stderr = other.mc_stderr;
            self.replicates = other.replicates;
        }
        self
    }
}

/// Independent per-replicate seeds drawn from one master stream.
pub fn replicate_seeds(seed: u64, replicates: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    (0..replicates).map(|_| rng.next_u64()).collect()
}

/// Monte Carlo estimate of `J` (or its r-average) with the standard error
/// across replicates.
pub fn jitter_mc(
    cells: &PartitionCells,
    f: &DensityField,
    weighting: Weighting,
    replicates: usize,
    seed: u64,
) -> Result<JitterEstimate> {
    jitter_mc_with(cells, f, weighting, replicates, seed, WeightScheme::Density)
}

/// Weights of jittered point sets.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightScheme {
    /// `α_j = f(z_j)`.
    #[default]
    Density,
    /// `α_j = 1`; Monte Carlo only, the closed form does not apply.
    Unit,
}

pub fn jitter_mc_with(
    cells: &PartitionCells,
    f: &DensityField,
    weighting: Weighting,
    replicates: usize,
    seed: u64,
    scheme: WeightScheme,
) -> Result<JitterEstimate> {
    if replicates < MIN_REPLICATES {
        return Err(Error::InvalidParameter {
            name: "replicates",
            value: replicates as f64,
            reason: "need at least 100 replicates",
        });
    }
    check(cells, f, weighting)?;
    let eval = PairwiseEvaluator::new(f, weighting);
    let fe = f.evaluator();
    let values: Vec<f64> = replicate_seeds(seed, replicates)
        .par_iter()
        .map(|&s| {
            let ps = sample_jitter(cells, s);
            let ps = match scheme {
                WeightScheme::Density => {
                    let alpha = ps.points().iter().map(|p| fe.eval(p.coords()).re).collect();
                    ps.with_weights(alpha).expect("same length")
                }
                WeightScheme::Unit => ps,
            };
            eval.value(&ps)
        })
        .collect();
    let n = values.len() as f64;
    let mean = crate::sum::sum(&values) / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).collect::<Accumulator>().value() / (n - 1.0);
    Ok(JitterEstimate {
        mc_value: Some(mean),
        mc_stderr: Some((var / n).sqrt()),
        replicates,
        ..JitterEstimate::default()
    })
}

fn check(cells: &PartitionCells, f: &DensityField, weighting: Weighting) -> Result<()> {
    if cells.dim() != f.dim() {
        return Err(Error::DimensionMismatch {
            expected: cells.dim(),
            found: f.dim(),
        });
    }
    weighting.validate()?;
    f.require_real()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JitterOptions {
    /// Tail target relative to the leading term `N⁻¹ |B| ‖f‖₂²`.
    pub rel_tolerance: f64,
    pub budget: u64,
    /// Also compute every per-cell term (cost grows with N).
    pub cell_terms: bool,
}

impl Default for JitterOptions {
    fn default() -> Self {
        Self {
            rel_tolerance: 1e-7,
            budget: DEFAULT_FREQ_BUDGET,
            cell_terms: false,
        }
    }
}

/// `sin(π q / H) / (π q)`, the 1-d transform of an interval of length `1/H`
/// centred at 0.
#[inline]
fn cube_sinc(q: i64, h: f64) -> f64 {
    if q == 0 {
        1.0 / h
    } else {
        let x = PI * q as f64;
        (x / h).sin() / x
    }
}

/// Cube transform `∫_{E} e^{-2πi q·x} dx` for the cell with the given centre.
pub fn cube_transform(q: &Freq, d: usize, h: usize, center: &[f64; MAX_DIM]) -> Complex64 {
    let hf = h as f64;
    let mut amp = 1.0;
    let mut ph = 0.0;
    for i in 0..d {
        amp *= cube_sinc(q[i], hf);
        ph += q[i] as f64 * center[i];
    }
    Complex64::from_polar(amp, -2.0 * PI * (ph - ph.round()))
}

/// Per-axis sinc values over `[-L, L]`.
struct SincTable {
    half: i64,
    vals: Vec<f64>,
}

impl SincTable {
    fn new(half: i64, h: f64) -> Self {
        Self {
            half,
            vals: (-half..=half).map(|q| cube_sinc(q, h)).collect(),
        }
    }

    #[inline]
    fn get(&self, q: i64) -> f64 {
        self.vals[(q + self.half) as usize]
    }
}

/// Coefficients grouped by residue class mod `H`, each carrying
/// `f̂(k) Π (-1)^{(H-1)⌊k_i/H⌋}`. Pairs `k ≡ k'` then contribute
/// `N |Σ_{class} f̂(k) s(m-k) ε(k)|²`, which is the sum over cells of the
/// per-cell terms.
fn residue_classes(f: &DensityField, h: usize) -> Vec<Vec<(Freq, Complex64)>> {
    let hh = h as i64;
    let d = f.dim();
    let mut classes: std::collections::BTreeMap<Freq, Vec<(Freq, Complex64)>> = Default::default();
    for (k, a) in f.coeffs() {
        let mut key = [0i64; MAX_DIM];
        let mut sign = 1.0;
        for i in 0..d {
            key[i] = k[i].rem_euclid(hh);
            if (k[i].div_euclid(hh) * (hh - 1)) % 2 != 0 {
                sign = -sign;
            }
        }
        classes.entry(key).or_default().push((*k, a * sign));
    }
    classes.into_values().collect()
}

/// Bound on `Σ_{|m| > M} w(m) S(m)` for a density with `‖f̂‖₁ = l1` and
/// coefficient box `K`.
fn closed_form_tail(d: usize, env: f64, m: f64, k: f64, h: usize, l1: f64) -> f64 {
    let t = ((m - k) / (d as f64).sqrt()).floor();
    if t < 1.0 {
        return f64::INFINITY;
    }
    let n = (h as f64).powi(d as i32);
    env * m.powi(-(d as i32) - 1) * n * l1 * l1 * d as f64 * (h as f64).powi(-(d as i32 - 1)) * 2.0
        / (PI * PI * t)
}

/// Closed form of `J` (or its r-average) from the cell identity. The lattice
/// sum is truncated where the analytic tail meets the tolerance; the result
/// is an upper bound on the exact value, off by at most `tail_bound`.
pub fn jitter_closed_form(
    cells: &PartitionCells,
    f: &DensityField,
    weighting: Weighting,
    opts: &JitterOptions,
) -> Result<JitterEstimate> {
    check(cells, f, weighting)?;
    let d = cells.dim();
    let h = cells.side_count();
    let n = cells.len();
    let leading = weighting.ball_measure(d) * f.l2_sq() / n as f64;
    if f.coeffs().is_empty() {
        return Ok(JitterEstimate {
            closed_form: Some(0.0),
            cell_terms: if opts.cell_terms { vec![0.0; n] } else { Vec::new() },
            ..JitterEstimate::default()
        });
    }
    let kmax = f.max_component();
    let kball = f.bandwidth();
    let l1 = f.coeff_l1();
    let env = weighting.envelope(d);
    let tol = opts.rel_tolerance * leading;

    // smallest cutoff meeting the tolerance
    let root = (d as f64).sqrt();
    let mut gap = root.max(1.0);
    while closed_form_tail(d, env, kball + gap, kball, h, l1) > tol {
        gap *= 1.5;
        if gap > 1e9 {
            break;
        }
    }
    let m_cut = (kball + gap).ceil();
    let needed = ((2.0 * m_cut + 1.0).powi(d as i32)) as u64;
    if needed > opts.budget {
        return Err(Error::BudgetExceeded {
            needed,
            budget: opts.budget,
        });
    }
    let tail = closed_form_tail(d, env, m_cut, kball, h, l1);

    let mi = m_cut as i64;
    let lim = mi * mi;
    let mut used = vec![false; lim as usize + 1];
    let freqs: Vec<Freq> = {
        let mut v = Vec::new();
        let r = |i: usize| if i < d { -mi..=mi } else { 0..=0 };
        for a in r(0) {
            for b in r(1) {
                for c in r(2) {
                    let m = [a, b, c];
                    let s = norm_sq(&m);
                    if s <= lim {
                        used[s as usize] = true;
                        v.push(m);
                    }
                }
            }
        }
        v
    };
    let weights = weighting.weights_by_norm_sq(d, lim, Some(&used));
    let w_of = |m: &Freq| {
        let s = norm_sq(m);
        if s == 0 {
            weighting.zero_weight(d)
        } else {
            weights[s as usize]
        }
    };
    let sinc = SincTable::new(mi + kmax, h as f64);
    let s_of = |q: &Freq| (0..d).map(|i| sinc.get(q[i])).product::<f64>();

    let classes = residue_classes(f, h);
    let total: Vec<f64> = freqs
        .par_chunks(4096)
        .map(|chunk| {
            let mut acc = Accumulator::new();
            for m in chunk {
                let mut s = 0.0;
                for class in &classes {
                    let mut g = Complex64::default();
                    for (k, c) in class {
                        g += c * s_of(&[m[0] - k[0], m[1] - k[1], m[2] - k[2]]);
                    }
                    s += g.norm_sqr();
                }
                acc.add(w_of(m) * s);
            }
            acc.value()
        })
        .collect();
    let cell_sum = n as f64 * crate::sum::sum(&total);

    let cell_terms = if opts.cell_terms {
        per_cell_terms(cells, f, &freqs, &w_of, &s_of)
    } else {
        Vec::new()
    };
    Ok(JitterEstimate {
        closed_form: Some(leading - cell_sum),
        tail_bound: tail,
        cutoff: Some(m_cut),
        cell_terms,
        ..JitterEstimate::default()
    })
}

fn per_cell_terms(
    cells: &PartitionCells,
    f: &DensityField,
    freqs: &[Freq],
    w_of: &(dyn Fn(&Freq) -> f64 + Sync),
    s_of: &(dyn Fn(&Freq) -> f64 + Sync),
) -> Vec<f64> {
    let d = cells.dim();
    let coeffs: Vec<(Freq, Complex64)> = f.coeffs().iter().map(|(k, c)| (*k, *c)).collect();
    (0..cells.len())
        .into_par_iter()
        .map(|j| {
            let c = cells.center(j);
            // f̂(k) e^{2πi k·c_j}
            let shifted: Vec<(Freq, Complex64)> = coeffs
                .iter()
                .map(|(k, v)| {
                    let ph: f64 = (0..d).map(|i| k[i] as f64 * c[i]).sum();
                    (*k, v * Complex64::from_polar(1.0, 2.0 * PI * (ph - ph.round())))
                })
                .collect();
            let mut acc = Accumulator::new();
            for m in freqs {
                let mut g = Complex64::default();
                for (k, v) in &shifted {
                    g += v * s_of(&[m[0] - k[0], m[1] - k[1], m[2] - k[2]]);
                }
                acc.add(w_of(m) * g.norm_sqr());
            }
            acc.value()
        })
        .collect()
}

/// Split of one cell's contribution `N⁻¹|B| ‖f χ_E‖² - ‖χ_B * (f χ_E)‖²` into
/// a within-cell variance part and a boundary part.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellDecomposition {
    /// `M_E(f)`, the cell average.
    pub mean: f64,
    /// `M_E(f²)`.
    pub mean_sq: f64,
    /// `N⁻² |B| M_E((f - M_E f)²)`.
    pub variance_term: f64,
    /// `N⁻² (|B| M_E(f)² - ‖χ_B * (f χ_E / |E|)‖²)`.
    pub boundary_term: f64,
}

/// Per-cell decomposition with exact cell averages from the coefficients.
pub fn cell_decomposition(
    cells: &PartitionCells,
    f: &DensityField,
    weighting: Weighting,
    opts: &JitterOptions,
) -> Result<Vec<CellDecomposition>> {
    let est = jitter_closed_form(
        cells,
        f,
        weighting,
        &JitterOptions {
            cell_terms: true,
            ..*opts
        },
    )?;
    let d = cells.dim();
    let h = cells.side_count();
    let n = cells.len() as f64;
    let bm = weighting.ball_measure(d);
    let coeffs: Vec<(Freq, Complex64)> = f.coeffs().iter().map(|(k, c)| (*k, *c)).collect();
    Ok((0..cells.len())
        .map(|j| {
            let c = cells.center(j);
            // ∫_E e^{2πi k·x} dx = conj of the cube transform at k
            let mut mean = Complex64::default();
            for (k, v) in &coeffs {
                mean += v * cube_transform(k, d, h, &c).conj();
            }
            let mut sq = Complex64::default();
            for (k, v) in &coeffs {
                for (kp, u) in &coeffs {
                    let q = [k[0] - kp[0], k[1] - kp[1], k[2] - kp[2]];
                    sq += v * u.conj() * cube_transform(&q, d, h, &c).conj();
                }
            }
            let mean = mean.re * n;
            let mean_sq = sq.re * n;
            let cell_term = est.cell_terms[j];
            CellDecomposition {
                mean,
                mean_sq,
                variance_term: bm * (mean_sq - mean * mean) / (n * n),
                boundary_term: (bm * mean * mean - n * n * cell_term) / (n * n),
            }
        })
        .collect())
}

/// `J` for a density constant on each cell, `f = Σ_j v_j χ_{E_j}`: every cell
/// term is `v_j² ‖χ_B * χ_E‖²`, so `J = ‖f‖₂² · J(N, 1, r)`.
pub fn piecewise_constant_jitter(cells: &PartitionCells, values: &[f64], weighting: Weighting, opts: &JitterOptions) -> Result<f64> {
    if values.len() != cells.len() {
        return Err(Error::LengthMismatch {
            points: cells.len(),
            weights: values.len(),
        });
    }
    let one = crate::density::constant_density(1.0, cells.dim())?;
    let unit = jitter_closed_form(cells, &one, weighting, opts)?
        .closed_form
        .expect("closed form present");
    let l2: f64 = values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64;
    Ok(unit * l2)
}

/// One row of a jitter experiment table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JitterRow {
    pub n: usize,
    pub r: String,
    pub j_closed: f64,
    pub j_mc: Option<f64>,
    pub stderr: Option<f64>,
    pub tail_bound: f64,
}

/// CSV with columns `N,r,J_closed,J_mc,stderr,tail_bound`.
pub fn rows_to_csv(rows: &[JitterRow]) -> String {
    let mut s = String::from("N,r,J_closed,J_mc,stderr,tail_bound\n");
    let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{:e},{},{},{:e}",
            r.n,
            r.r,
            r.j_closed,
            opt(r.j_mc),
            opt(r.stderr),
            r.tail_bound
        );
    }
    s
}

pub fn weighting_label(w: &Weighting) -> String {
    match *w {
        Weighting::Fixed { r } => format!("{r}"),
        Weighting::Radial { a, b } => format!("{a}:{b}"),
    }
}

/// `J` for the Hölder test function across `N = H^d`.
pub fn holder_rate_experiment(
    beta: f64,
    d: usize,
    h_list: &[usize],
    weighting: Weighting,
    shape: HolderShape,
    opts: &JitterOptions,
) -> Result<Vec<JitterRow>> {
    let hd = holder_density(beta, d, shape)?;
    h_list
        .iter()
        .map(|&h| {
            let cells = cube_partition(h, d)?;
            let est = jitter_closed_form(&cells, &hd.field, weighting, opts)?;
            Ok(JitterRow {
                n: cells.len(),
                r: weighting_label(&weighting),
                j_closed: est.closed_form.expect("closed form present"),
                j_mc: None,
                stderr: None,
                tail_bound: est.tail_bound,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{constant_density, random_real_trig};

    #[test]
    fn single_cell_constant() {
        let cells = cube_partition(1, 1).unwrap();
        let f = constant_density(1.0, 1).unwrap();
        let est = jitter_closed_form(&cells, &f, Weighting::Fixed { r: 0.25 }, &JitterOptions::default()).unwrap();
        let j = est.closed_form.unwrap();
        assert!(j >= 0.25 - 1e-12 && j - est.tail_bound <= 0.25 + 1e-12, "{j}");
        assert!((j - 0.25).abs() < 1e-7);
    }

    #[test]
    fn zero_density_is_zero() {
        let cells = cube_partition(4, 1).unwrap();
        let f = constant_density(0.0, 1).unwrap();
        let w = Weighting::Fixed { r: 0.2 };
        let mc = jitter_mc(&cells, &f, w, 100, 1).unwrap();
        assert_eq!(mc.mc_value, Some(0.0));
        assert_eq!(mc.mc_stderr, Some(0.0));
        let cf = jitter_closed_form(&cells, &f, w, &JitterOptions::default()).unwrap();
        assert_eq!(cf.closed_form, Some(0.0));
    }

    #[test]
    fn cell_terms_add_up() {
        let f = random_real_trig(2, 2, 4).unwrap();
        let cells = cube_partition(3, 2).unwrap();
        let w = Weighting::Fixed { r: 0.2 };
        let opts = JitterOptions {
            cell_terms: true,
            rel_tolerance: 1e-6,
            ..JitterOptions::default()
        };
        let est = jitter_closed_form(&cells, &f, w, &opts).unwrap();
        let leading = w.ball_measure(2) * f.l2_sq() / 9.0;
        let from_cells = leading - est.cell_terms.iter().sum::<f64>();
        let j = est.closed_form.unwrap();
        assert!((from_cells - j).abs() < 1e-12 * leading, "{from_cells} vs {j}");
        assert!(est.cell_terms.iter().all(|&t| t >= 0.0));
        assert!(j >= 0.0);
    }

    #[test]
    fn aliasing_sign_matches_direct_phase_sum() {
        // Σ_j e^{2πi p·c_j} = N (-1)^{q(H-1)} for p = Hq, else 0
        for h in [2usize, 3, 4, 5] {
            let cells = cube_partition(h, 1).unwrap();
            for p in -12i64..=12 {
                let mut s = Complex64::default();
                for j in 0..cells.len() {
                    let c = cells.center(j);
                    s += Complex64::from_polar(1.0, 2.0 * PI * p as f64 * c[0]);
                }
                let hh = h as i64;
                let want = if p % hh == 0 {
                    let q = p / hh;
                    h as f64 * if (q * (hh - 1)) % 2 == 0 { 1.0 } else { -1.0 }
                } else {
                    0.0
                };
                assert!((s.re - want).abs() < 1e-12 && s.im.abs() < 1e-12, "h={h} p={p}");
            }
        }
    }

    #[test]
    fn cell_decomposition_matches_quadrature() {
        let f = random_real_trig(1, 4, 9).unwrap();
        let cells = cube_partition(3, 1).unwrap();
        let w = Weighting::Fixed { r: 0.2 };
        let opts = JitterOptions::default();
        let parts = cell_decomposition(&cells, &f, w, &opts).unwrap();
        let j = jitter_closed_form(&cells, &f, w, &opts).unwrap().closed_form.unwrap();
        let total: f64 = parts.iter().map(|p| p.variance_term + p.boundary_term).sum();
        assert!((total - j).abs() < 1e-12, "{total} vs {j}");
        let g = crate::quadrature::GaussLegendre::new(40);
        let ev = f.evaluator();
        for (i, p) in parts.iter().enumerate() {
            let a = cells.lower_corner(i)[0];
            let b = a + cells.side();
            let mean = g.integrate(a, b, |x| ev.eval(&[x]).re) * 3.0;
            let mean_sq = g.integrate(a, b, |x| ev.eval(&[x]).re.powi(2)) * 3.0;
            assert!((p.mean - mean).abs() < 1e-12, "{} vs {mean}", p.mean);
            assert!((p.mean_sq - mean_sq).abs() < 1e-12);
            assert!(p.variance_term >= 0.0);
        }
    }

    #[test]
    fn piecewise_constant_cells() {
        let cells = cube_partition(4, 1).unwrap();
        let w = Weighting::Fixed { r: 0.3 };
        let opts = JitterOptions {
            cell_terms: true,
            ..JitterOptions::default()
        };
        // constant is the one cell-constant trig polynomial
        let c = piecewise_constant_jitter(&cells, &[2.0; 4], w, &opts).unwrap();
        let f = constant_density(2.0, 1).unwrap();
        let direct = jitter_closed_form(&cells, &f, w, &opts).unwrap();
        assert!((c - direct.closed_form.unwrap()).abs() < 1e-12);
        let parts = cell_decomposition(&cells, &f, w, &opts).unwrap();
        assert!(parts.iter().all(|p| p.variance_term.abs() < 1e-15));
        // every cell of the unit density carries the same term
        let one = constant_density(1.0, 1).unwrap();
        let terms = jitter_closed_form(&cells, &one, w, &opts).unwrap().cell_terms;
        let values = [0.5, 1.5, -1.0, 3.0];
        let bm = w.ball_measure(1);
        let by_cells: f64 = values
            .iter()
            .zip(&terms)
            .map(|(v, t)| v * v * (bm / 16.0 - t))
            .sum();
        let pc = piecewise_constant_jitter(&cells, &values, w, &opts).unwrap();
        assert!((by_cells - pc).abs() < 1e-12, "{by_cells} vs {pc}");
        assert!(terms.windows(2).all(|t| (t[0] - t[1]).abs() < 1e-14));
    }

    #[test]
    fn seeds_are_reproducible() {
        assert_eq!(replicate_seeds(5, 10), replicate_seeds(5, 10));
        assert_ne!(replicate_seeds(5, 10), replicate_seeds(6, 10));
    }
}
