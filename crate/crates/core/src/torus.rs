//! Points, weighted point sets, balls and cube partitions on the flat torus
//! `T^d = [-1/2, 1/2)^d`.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Largest supported dimension.
pub const MAX_DIM: usize = 3;

pub fn check_dim(d: usize) -> Result<usize> {
    if (1..=MAX_DIM).contains(&d) {
        Ok(d)
    } else {
        Err(Error::UnsupportedDimension(d))
    }
}

/// Maps a real number to `[-1/2, 1/2)`; `0.5` goes to `-0.5`.
#[inline]
pub fn wrap(x: f64) -> f64 {
    let r = x - (x + 0.5).floor();
    if r >= 0.5 {
        r - 1.0
    } else if r < -0.5 {
        r + 1.0
    } else {
        r
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TorusPoint {
    dim: usize,
    coords: [f64; MAX_DIM],
}

impl TorusPoint {
    /// Builds a point, wrapping every coordinate into `[-1/2, 1/2)`.
    pub fn new(coords: &[f64]) -> Result<Self> {
        let dim = check_dim(coords.len())?;
        let mut c = [0.0; MAX_DIM];
        for (dst, &x) in c.iter_mut().zip(coords) {
            if !x.is_finite() {
                return Err(Error::Parse(format!("non-finite coordinate {x}")));
            }
            *dst = wrap(x);
        }
        Ok(Self { dim, coords: c })
    }

    pub fn origin(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self {
            dim,
            coords: [0.0; MAX_DIM],
        })
    }

    pub(crate) fn from_array(dim: usize, coords: [f64; MAX_DIM]) -> Self {
        let mut c = [0.0; MAX_DIM];
        for i in 0..dim {
            c[i] = wrap(coords[i]);
        }
        Self { dim, coords: c }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords[..self.dim]
    }

    pub(crate) fn raw(&self) -> &[f64; MAX_DIM] {
        &self.coords
    }

    /// Wrapped componentwise difference `self - other`.
    pub fn sub(&self, other: &TorusPoint) -> Result<TorusPoint> {
        same_dim(self.dim, other.dim)?;
        let mut c = [0.0; MAX_DIM];
        for i in 0..self.dim {
            c[i] = wrap(self.coords[i] - other.coords[i]);
        }
        Ok(TorusPoint { dim: self.dim, coords: c })
    }
}

fn same_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

/// Squared torus distance on raw coordinate arrays (no dimension checks).
#[inline]
pub(crate) fn dist_sq_raw(dim: usize, x: &[f64; MAX_DIM], y: &[f64; MAX_DIM]) -> f64 {
    let mut s = 0.0;
    for i in 0..dim {
        let t = wrap(x[i] - y[i]);
        s += t * t;
    }
    s
}

/// Torus distance `min_k |x - y + k|`.
pub fn wrap_distance(x: &TorusPoint, y: &TorusPoint) -> Result<f64> {
    same_dim(x.dim, y.dim)?;
    Ok(dist_sq_raw(x.dim, &x.coords, &y.coords).sqrt())
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeightedPointSet {
    dim: usize,
    points: Vec<TorusPoint>,
    weights: Vec<f64>,
    nonneg: bool,
}

impl WeightedPointSet {
    pub fn new(points: Vec<TorusPoint>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyPointSet);
        }
        if points.len() != weights.len() {
            return Err(Error::LengthMismatch {
                points: points.len(),
                weights: weights.len(),
            });
        }
        let dim = points[0].dim;
        for p in &points {
            same_dim(dim, p.dim)?;
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite()) {
            return Err(Error::Parse(format!("non-finite weight {w}")));
        }
        let nonneg = weights.iter().all(|&w| w >= 0.0);
        Ok(Self {
            dim,
            points,
            weights,
            nonneg,
        })
    }

    /// All weights equal to one.
    pub fn unit_weights(points: Vec<TorusPoint>) -> Result<Self> {
        let n = points.len();
        Self::new(points, vec![1.0; n])
    }

    /// Builds a set from flat coordinates (`d` per point).
    pub fn from_flat(dim: usize, coords: &[f64], weights: Vec<f64>) -> Result<Self> {
        check_dim(dim)?;
        if coords.len() % dim != 0 {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: coords.len() % dim,
            });
        }
        let points = coords
            .chunks(dim)
            .map(TorusPoint::new)
            .collect::<Result<Vec<_>>>()?;
        Self::new(points, weights)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[TorusPoint] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn nonneg(&self) -> bool {
        self.nonneg
    }

    /// Replaces the weights, recomputing the sign flag.
    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        Self::new(self.points.clone(), weights)
    }

    /// `N^{-1} Σ |α_j|`, the trivial bound on every exponential sum.
    pub fn mean_abs_weight(&self) -> f64 {
        crate::sum::sum(&self.weights.iter().map(|w| w.abs()).collect::<Vec<_>>())
            / self.len() as f64
    }

    /// SHA-256 over the dimension, coordinates and weights (little-endian bits).
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.dim as u64).to_le_bytes());
        h.update((self.len() as u64).to_le_bytes());
        for (p, w) in self.points.iter().zip(&self.weights) {
            for x in p.coords() {
                h.update(x.to_bits().to_le_bytes());
            }
            h.update(w.to_bits().to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    /// Plain-text form: `dim N`, then `x_1 ... x_d alpha` per line.
    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.dim, self.len());
        for (p, w) in self.points.iter().zip(&self.weights) {
            for x in p.coords() {
                let _ = write!(s, "{x:?} ");
            }
            let _ = writeln!(s, "{w:?}");
        }
        s
    }

    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(self.to_text().as_bytes())?;
        Ok(())
    }

    pub fn read_text<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input
            .lines()
            .map(|l| l.map_err(Error::from))
            .filter(|l| l.as_ref().map(|s| !s.trim().is_empty()).unwrap_or(true));
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("missing header".into()))??;
        let mut it = header.split_whitespace();
        let dim: usize = parse_field(it.next(), "dim")?;
        let n: usize = parse_field(it.next(), "N")?;
        check_dim(dim)?;
        let mut coords = Vec::with_capacity(n * dim);
        let mut weights = Vec::with_capacity(n);
        for line in lines.by_ref().take(n) {
            let line = line?;
            let vals = line
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|e| Error::Parse(format!("{t:?}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            if vals.len() != dim + 1 {
                return Err(Error::Parse(format!(
                    "expected {} fields per point, got {}",
                    dim + 1,
                    vals.len()
                )));
            }
            coords.extend_from_slice(&vals[..dim]);
            weights.push(vals[dim]);
        }
        if weights.len() != n {
            return Err(Error::Parse(format!(
                "header declares {n} points, found {}",
                weights.len()
            )));
        }
        Self::from_flat(dim, &coords, weights)
    }
}

fn parse_field<T: std::str::FromStr>(tok: Option<&str>, name: &str) -> Result<T> {
    tok.and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::Parse(format!("bad or missing header field {name}")))
}

/// Normalized weight norm `(N^{-1} Σ α_j²)^{1/2}`.
pub fn weight_norm(ps: &WeightedPointSet) -> f64 {
    let sq: Vec<f64> = ps.weights.iter().map(|w| w * w).collect();
    (crate::sum::sum(&sq) / ps.len() as f64).sqrt()
}

/// A ball `B(c, r)` with `0 < r < 1/2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BallWindow {
    dim: usize,
    radius: f64,
    center: TorusPoint,
}

impl BallWindow {
    pub fn new(dim: usize, radius: f64) -> Result<Self> {
        Self::with_center(radius, TorusPoint::origin(dim)?)
    }

    pub fn with_center(radius: f64, center: TorusPoint) -> Result<Self> {
        check_radius(radius)?;
        Ok(Self {
            dim: center.dim,
            radius,
            center,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn center(&self) -> &TorusPoint {
        &self.center
    }

    pub fn contains(&self, x: &TorusPoint) -> Result<bool> {
        Ok(wrap_distance(&self.center, x)? < self.radius)
    }

    pub fn volume(&self) -> f64 {
        ball_volume(self.dim, self.radius)
    }
}

pub fn check_radius(r: f64) -> Result<()> {
    if r > 0.0 && r < 0.5 {
        Ok(())
    } else {
        Err(Error::InvalidRadius(r))
    }
}

pub fn check_interval(a: f64, b: f64) -> Result<()> {
    if a > 0.0 && a < b && b < 0.5 {
        Ok(())
    } else {
        Err(Error::InvalidInterval { a, b })
    }
}

/// Volume of the unit ball in dimension `d`.
pub fn unit_ball_volume(d: usize) -> f64 {
    use std::f64::consts::PI;
    match d {
        1 => 2.0,
        2 => PI,
        3 => 4.0 * PI / 3.0,
        _ => f64::NAN,
    }
}

pub fn ball_volume(d: usize, r: f64) -> f64 {
    unit_ball_volume(d) * r.powi(d as i32)
}

/// The grid `(1/H) Z^d ∩ [-1/2, 1/2)^d` with unit weights.
pub fn grid_points(h: usize, d: usize) -> Result<WeightedPointSet> {
    check_dim(d)?;
    if h == 0 {
        return Err(Error::InvalidParameter {
            name: "H",
            value: 0.0,
            reason: "side count must be positive",
        });
    }
    let hf = h as f64;
    // k/H ∈ [-1/2, 1/2)  ⇔  k ∈ [ceil(-H/2), ceil(H/2) - 1]
    let lo = -((h / 2) as i64);
    let axis: Vec<f64> = (0..h as i64).map(|i| (lo + i) as f64 / hf).collect();
    let n = h.pow(d as u32);
    let points = (0..n)
        .map(|j| {
            let idx = multi_index(j, h, d);
            let mut c = [0.0; MAX_DIM];
            for i in 0..d {
                c[i] = axis[idx[i]];
            }
            TorusPoint::from_array(d, c)
        })
        .collect();
    WeightedPointSet::unit_weights(points)
}

/// Row-major multi-index of cell `j` (last axis fastest).
pub(crate) fn multi_index(mut j: usize, h: usize, d: usize) -> [usize; MAX_DIM] {
    let mut idx = [0; MAX_DIM];
    for i in (0..d).rev() {
        idx[i] = j % h;
        j /= h;
    }
    idx
}

/// `N = H^d` half-open cubes of side `1/H` tiling `[-1/2, 1/2)^d`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PartitionCells {
    dim: usize,
    side_count: usize,
}

impl PartitionCells {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn side_count(&self) -> usize {
        self.side_count
    }

    pub fn len(&self) -> usize {
        self.side_count.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn side(&self) -> f64 {
        1.0 / self.side_count as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.side().powi(self.dim as i32)
    }

    pub fn cell_diameter(&self) -> f64 {
        (self.dim as f64).sqrt() * self.side()
    }

    pub fn lower_corner(&self, j: usize) -> [f64; MAX_DIM] {
        let idx = multi_index(j, self.side_count, self.dim);
        let mut c = [0.0; MAX_DIM];
        for i in 0..self.dim {
            c[i] = -0.5 + idx[i] as f64 * self.side();
        }
        c
    }

    pub fn center(&self, j: usize) -> [f64; MAX_DIM] {
        let mut c = self.lower_corner(j);
        for x in c.iter_mut().take(self.dim) {
            *x += 0.5 * self.side();
        }
        c
    }

    /// Index of the cell containing `x`.
    pub fn locate(&self, x: &TorusPoint) -> usize {
        let h = self.side_count;
        let mut j = 0;
        for &c in x.coords() {
            let i = (((c + 0.5) * h as f64).floor() as usize).min(h - 1);
            j = j * h + i;
        }
        j
    }

    pub fn contains(&self, j: usize, x: &TorusPoint) -> bool {
        let lo = self.lower_corner(j);
        let s = self.side();
        x.coords()
            .iter()
            .zip(lo.iter())
            .all(|(&c, &l)| c >= l && c < l + s)
    }
}

pub fn cube_partition(h: usize, d: usize) -> Result<PartitionCells> {
    check_dim(d)?;
    if h == 0 {
        return Err(Error::InvalidParameter {
            name: "H",
            value: 0.0,
            reason: "side count must be positive",
        });
    }
    Ok(PartitionCells {
        dim: d,
        side_count: h,
    })
}

/// One uniform point per cell. Cell `j` draws from ChaCha stream `j`, so the
/// result depends only on `(seed, j)` and not on scheduling.
pub fn sample_jitter(cells: &PartitionCells, seed: u64) -> WeightedPointSet {
    let n = cells.len();
    let s = cells.side();
    let points: Vec<TorusPoint> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(j as u64);
            let lo = cells.lower_corner(j);
            let mut c = [0.0; MAX_DIM];
            for i in 0..cells.dim {
                // stays inside the half-open cell: u < 1 and l + s·u < l + s
                let x = lo[i] + s * rng.gen::<f64>();
                c[i] = if x >= lo[i] + s { lo[i] } else { x };
            }
            TorusPoint::from_array(cells.dim, c)
        })
        .collect();
    WeightedPointSet::unit_weights(points).expect("partition has at least one cell")
}
