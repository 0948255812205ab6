//! Bessel function `J_1` and the radial profiles of ball transforms.

use std::f64::consts::PI;

const SERIES_MAX: f64 = 12.0;
const ASYMPTOTIC_MIN: f64 = 30.0;

/// Bessel function of the first kind of order one.
pub fn j1(x: f64) -> f64 {
    if x < 0.0 {
        return -j1(-x);
    }
    if x <= SERIES_MAX {
        j1_series(x)
    } else if x < ASYMPTOTIC_MIN {
        j1_trapezoid(x)
    } else {
        j1_hankel(x)
    }
}

fn j1_series(x: f64) -> f64 {
    let h = 0.5 * x;
    let q = -h * h;
    let mut term = h;
    let mut s = term;
    let mut k = 1.0;
    loop {
        term *= q / (k * (k + 1.0));
        s += term;
        if term.abs() < 1e-17 * s.abs().max(1e-300) {
            break;
        }
        k += 1.0;
        if k > 200.0 {
            break;
        }
    }
    s
}

/// Bessel's integral `J_1(x) = (1/2π) ∫_0^{2π} cos(τ - x sin τ) dτ`; the
/// trapezoid rule on a full period converges geometrically once the node
/// count exceeds `x` by a margin.
fn j1_trapezoid(x: f64) -> f64 {
    let p = 2 * x.ceil() as usize + 32;
    let step = 2.0 * PI / p as f64;
    let mut acc = crate::sum::Accumulator::new();
    for k in 0..p {
        let t = k as f64 * step;
        acc.add((t - x * t.sin()).cos());
    }
    acc.value() / p as f64
}

fn j1_hankel(x: f64) -> f64 {
    let mu = 4.0;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut t = 1.0f64;
    let mut k = 1.0f64;
    loop {
        let next = t * (mu - (2.0 * k - 1.0).powi(2)) / (k * 8.0 * x);
        if next.abs() >= t.abs() || next.abs() < 1e-17 {
            break;
        }
        t = next;
        // k mod 4: 1 → +Q, 2 → -P, 3 → -Q, 0 → +P
        match (k as u64) % 4 {
            1 => q += t,
            2 => p -= t,
            3 => q -= t,
            _ => p += t,
        }
        k += 1.0;
    }
    let w = x - 0.75 * PI;
    (2.0 / (PI * x)).sqrt() * (p * w.cos() - q * w.sin())
}

/// Normalized ball profile `Φ_d(t)` with `χ̂_{B_r}(m) = v_d r^d Φ_d(2π r |m|)`
/// and `Φ_d(0) = 1`.
pub fn ball_profile(d: usize, t: f64) -> f64 {
    let t = t.abs();
    match d {
        1 => {
            if t < 1e-4 {
                1.0 - t * t / 6.0
            } else {
                t.sin() / t
            }
        }
        2 => {
            if t < 1e-4 {
                1.0 - t * t / 8.0
            } else {
                2.0 * j1(t) / t
            }
        }
        3 => {
            if t < 0.2 {
                let t2 = t * t;
                1.0 - t2 / 10.0 + t2 * t2 / 280.0 - t2 * t2 * t2 / 15120.0
                    + t2 * t2 * t2 * t2 / 1330560.0
            } else {
                3.0 * (t.sin() - t * t.cos()) / (t * t * t)
            }
        }
        _ => f64::NAN,
    }
}
