//! Ball self-overlap volumes `A_r(s) = |B_r ∩ (B_r + s)|` and their r-integrals.
//! These give the exact pair form of the squared discrepancy.

use std::f64::consts::PI;

use crate::spectral::Weighting;
use crate::torus::{wrap, MAX_DIM};

/// `|B_r ∩ (B_r + s)|` for `|s| = s`.
pub fn overlap(d: usize, r: f64, s: f64) -> f64 {
    if s >= 2.0 * r {
        return 0.0;
    }
    match d {
        1 => 2.0 * r - s,
        2 => 2.0 * r * r * (s / (2.0 * r)).acos() - 0.5 * s * (4.0 * r * r - s * s).max(0.0).sqrt(),
        3 => PI * (16.0 * r * r * r - 12.0 * r * r * s + s * s * s) / 12.0,
        _ => f64::NAN,
    }
}

/// `∫_a^b A_r(s) dr`.
pub fn overlap_radial(d: usize, a: f64, b: f64, s: f64) -> f64 {
    let r0 = a.max(0.5 * s);
    if r0 >= b {
        return 0.0;
    }
    match d {
        1 => {
            let g = |r: f64| r * r - s * r;
            g(b) - g(r0)
        }
        2 => {
            // antiderivative in u = 2r
            let g = |u: f64| {
                let root = (u * u - s * s).max(0.0).sqrt();
                let ac = if u > 0.0 { (s / u).min(1.0).acos() } else { 0.0 };
                let log = if s > 0.0 { s * s * s / 6.0 * (u + root).ln() } else { 0.0 };
                u * u * u / 6.0 * ac - s * u / 3.0 * root + log
            };
            0.5 * (g(2.0 * b) - g(2.0 * r0))
        }
        3 => {
            let g = |r: f64| PI * (4.0 * r.powi(4) - 4.0 * r * r * r * s + s * s * s * r) / 12.0;
            g(b) - g(r0)
        }
        _ => f64::NAN,
    }
}

/// Overlap of the periodized ball with its translate by `δ`: `Σ_k A(δ + k)`.
pub fn periodic_overlap(d: usize, w: &Weighting, delta: &[f64; MAX_DIM]) -> f64 {
    let reach = match *w {
        Weighting::Fixed { r } => 2.0 * r,
        Weighting::Radial { b, .. } => 2.0 * b,
    };
    // candidate image offsets per axis
    let mut cand = [[0.0f64; 2]; MAX_DIM];
    let mut ncand = [0usize; MAX_DIM];
    for i in 0..d {
        let x = wrap(delta[i]);
        cand[i][0] = x;
        ncand[i] = 1;
        let other = if x >= 0.0 { x - 1.0 } else { x + 1.0 };
        if other.abs() < reach {
            cand[i][1] = other;
            ncand[i] = 2;
        }
        if x.abs() >= reach && ncand[i] == 1 {
            return 0.0;
        }
    }
    let mut total = 0.0;
    let n1 = ncand[0];
    let n2 = if d > 1 { ncand[1] } else { 1 };
    let n3 = if d > 2 { ncand[2] } else { 1 };
    for i in 0..n1 {
        for j in 0..n2 {
            for k in 0..n3 {
                let mut s2 = cand[0][i] * cand[0][i];
                if d > 1 {
                    s2 += cand[1][j] * cand[1][j];
                }
                if d > 2 {
                    s2 += cand[2][k] * cand[2][k];
                }
                let s = s2.sqrt();
                if s < reach {
                    total += match *w {
                        Weighting::Fixed { r } => overlap(d, r, s),
                        Weighting::Radial { a, b } => overlap_radial(d, a, b, s),
                    };
                }
            }
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::GaussLegendre;
    use crate::torus::ball_volume;

    #[test]
    fn zero_shift_is_volume() {
        for d in 1..=3 {
            assert!((overlap(d, 0.3, 0.0) - ball_volume(d, 0.3)).abs() < 1e-15);
            assert_eq!(overlap(d, 0.3, 0.6), 0.0);
        }
    }

    #[test]
    fn lens_matches_slice_integrals() {
        // d = 2: integrate the chord-overlap length over one axis
        let (r, s) = (0.21f64, 0.13);
        let g = GaussLegendre::new(40);
        let y0 = (r * r - s * s / 4.0).sqrt();
        let br = [-r, -y0, y0, r];
        let v = g.piecewise(&br, |y| {
            let h = (r * r - y * y).max(0.0).sqrt();
            // intervals (-h, h) and (s - h, s + h)
            (2.0 * h - s).max(0.0)
        });
        assert!((v - overlap(2, r, s)).abs() < 1e-6);
        // d = 3: integrate lens areas over one axis
        let v = g.piecewise(&br, |z| {
            let rr = (r * r - z * z).max(0.0).sqrt();
            overlap(2, rr, s)
        });
        assert!((v - overlap(3, r, s)).abs() < 1e-6);
    }

    #[test]
    fn radial_integrals_match_quadrature() {
        let g = GaussLegendre::new(30);
        for d in 1..=3 {
            for &s in &[0.0, 0.05, 0.3, 0.5, 0.79] {
                let (a, b) = (0.1f64, 0.4);
                let r0 = a.max(s / 2.0);
                let q = if r0 < b { g.composite(r0, b, 20, |r| overlap(d, r, s)) } else { 0.0 };
                let c = overlap_radial(d, a, b, s);
                assert!((q - c).abs() < 1e-9, "d={d} s={s}: {q} vs {c}");
            }
        }
    }

    #[test]
    fn periodic_images() {
        // in d = 1 with r = 0.3 a shift of 0.5 overlaps from both sides
        let w = Weighting::Fixed { r: 0.3 };
        let v = periodic_overlap(1, &w, &[0.5, 0.0, 0.0]);
        assert!((v - 2.0 * 0.1).abs() < 1e-15);
        // total overlap integrates to |B|²
        let g = GaussLegendre::new(20);
        let tot = g.piecewise(&[-0.5, -0.4, 0.0, 0.4, 0.5], |x| periodic_overlap(1, &w, &[x, 0.0, 0.0]));
        assert!((tot - 0.36).abs() < 1e-12);
    }
}
