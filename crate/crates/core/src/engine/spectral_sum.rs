//! Truncated lattice sum `Σ_{|m| ≤ M} w(m) |E(m) - f̂(-m)|²`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::density::DensityField;
use crate::spectral::{norm_sq, Freq, Weighting};
use crate::sum::Accumulator;
use crate::torus::{WeightedPointSet, MAX_DIM};

/// Steps between direct re-evaluations of the phasors.
const REANCHOR: usize = 512;
/// Longest run of one line handled as a single task.
const SEGMENT: i64 = 1 << 15;
/// Largest dense weight table, in entries.
const MAX_TABLE: i64 = 1 << 22;

/// Weight lookup by `|m|²`.
struct WeightFn {
    d: usize,
    weighting: Weighting,
    table: Option<Vec<f64>>,
}

impl WeightFn {
    fn new(d: usize, weighting: Weighting, m_max: f64) -> Self {
        let max_sq = (m_max * m_max).floor() as i64;
        // d = 1 weights are a single sine; elsewhere tabulate per shell
        let table = (d > 1 && max_sq <= MAX_TABLE).then(|| weighting.weights_by_norm_sq(d, max_sq, None));
        Self { d, weighting, table }
    }

    #[inline]
    fn get(&self, s: i64) -> f64 {
        if s == 0 {
            return self.weighting.zero_weight(self.d);
        }
        match &self.table {
            Some(t) => t[s as usize],
            None => self.weighting.weight(self.d, (s as f64).sqrt()),
        }
    }
}

/// A run `m_last ∈ [lo, hi]` with a fixed prefix.
#[derive(Clone, Copy)]
struct Segment {
    prefix: [i64; MAX_DIM],
    lo: i64,
    hi: i64,
}

fn segments(d: usize, m_max: f64) -> Vec<Segment> {
    let m2 = m_max * m_max;
    let k = m_max.floor() as i64;
    let mut out = Vec::new();
    let mut push = |prefix: [i64; MAX_DIM], lo: i64, hi: i64| {
        let mut s = lo;
        while s <= hi {
            let e = (s + SEGMENT - 1).min(hi);
            out.push(Segment { prefix, lo: s, hi: e });
            s = e + 1;
        }
    };
    let lim = m2.floor() as i64;
    // largest l with l² + used ≤ ⌊M²⌋, or -1
    let len = |used: i64| -> i64 {
        if used > lim {
            return -1;
        }
        let mut l = ((lim - used) as f64).sqrt() as i64;
        while l * l + used > lim {
            l -= 1;
        }
        while (l + 1) * (l + 1) + used <= lim {
            l += 1;
        }
        l
    };
    // half-space: the first nonzero component is positive
    match d {
        1 => push([0; MAX_DIM], 1, k),
        2 => {
            push([0; MAX_DIM], 1, k);
            for a in 1..=k {
                let l = len(a * a);
                if l >= 0 {
                    push([a, 0, 0], -l, l);
                }
            }
        }
        _ => {
            push([0; MAX_DIM], 1, k);
            for b in 1..=k {
                let l = len(b * b);
                if l >= 0 {
                    push([0, b, 0], -l, l);
                }
            }
            for a in 1..=k {
                for b in -k..=k {
                    let l = len(a * a + b * b);
                    if l >= 0 {
                        push([a, b, 0], -l, l);
                    }
                }
            }
        }
    }
    out
}

#[inline]
fn unit(ph: f64) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * (ph - ph.round()))
}

/// Value of the truncated sum and the number of frequencies visited.
pub(crate) fn truncated_sum(ps: &WeightedPointSet, f: &DensityField, weighting: Weighting, m_max: f64) -> (f64, u64) {
    let d = ps.dim();
    let n = ps.len() as f64;
    let w = WeightFn::new(d, weighting, m_max);
    let kbox = f.max_component();
    let last = d - 1;
    let coords: Vec<[f64; MAX_DIM]> = ps.points().iter().map(|p| *p.raw()).collect();
    let alpha = ps.weights();
    let fhat = |m: &Freq| -> Complex64 {
        if m.iter().all(|k| k.abs() <= kbox) {
            f.coef(m)
        } else {
            Complex64::default()
        }
    };

    let segs = segments(d, m_max);
    let partial: Vec<(f64, u64)> = segs
        .par_iter()
        .map(|seg| {
            let mut acc = Accumulator::new();
            let mut count = 0u64;
            let step: Vec<Complex64> = coords.iter().map(|z| unit(z[last])).collect();
            let anchor = |m: &Freq| -> Vec<Complex64> {
                coords
                    .iter()
                    .map(|z| {
                        let mut ph = 0.0;
                        for i in 0..d {
                            ph += m[i] as f64 * z[i];
                        }
                        unit(ph)
                    })
                    .collect()
            };
            let mut m = seg.prefix;
            m[last] = seg.lo;
            let mut ph = anchor(&m);
            let base = norm_sq(&seg.prefix) - seg.prefix[last] * seg.prefix[last];
            for (t, ml) in (seg.lo..=seg.hi).enumerate() {
                if t > 0 && t % REANCHOR == 0 {
                    m[last] = ml;
                    ph = anchor(&m);
                }
                let mut re = 0.0;
                let mut im = 0.0;
                for (p, a) in ph.iter().zip(alpha) {
                    re += a * p.re;
                    im += a * p.im;
                }
                let e = Complex64::new(re / n, im / n);
                m[last] = ml;
                let wm = w.get(base + ml * ml);
                let mneg = [-m[0], -m[1], -m[2]];
                // m and -m: E(-m) = conj E(m)
                let t1 = (e - fhat(&mneg)).norm_sqr();
                let t2 = (e.conj() - fhat(&m)).norm_sqr();
                acc.add(wm * (t1 + t2));
                count += 2;
                for (p, s) in ph.iter_mut().zip(&step) {
                    *p *= s;
                }
            }
            (acc.value(), count)
        })
        .collect();

    let mut acc = Accumulator::new();
    // m = 0: E(0) is the mean weight
    let e0 = Complex64::new(crate::sum::sum(alpha) / n, 0.0);
    acc.add(w.get(0) * (e0 - f.mean()).norm_sqr());
    let mut count = 1u64;
    for (v, c) in partial {
        acc.add(v);
        count += c;
    }
    (acc.value(), count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::enumerate_lattice;

    #[test]
    fn segments_cover_half_space() {
        for d in 1..=3 {
            let m_max = 6.3;
            let full = enumerate_lattice(d, m_max).unwrap().len();
            let mut seen = std::collections::BTreeSet::new();
            for s in segments(d, m_max) {
                for ml in s.lo..=s.hi {
                    let mut m = s.prefix;
                    m[d - 1] = ml;
                    assert!(norm_sq(&m) > 0 && norm_sq(&m) as f64 <= m_max * m_max);
                    assert!(seen.insert(m));
                    assert!(!seen.contains(&[-m[0], -m[1], -m[2]]));
                }
            }
            assert_eq!(2 * seen.len(), full);
        }
    }
}
