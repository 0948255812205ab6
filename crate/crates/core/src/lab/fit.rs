use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Least-squares line through `(log N, log value)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    /// Largest absolute log-residual.
    pub residual: f64,
    pub points: usize,
}

impl ScalingFit {
    pub fn predict(&self, n: f64) -> f64 {
        (self.intercept + self.slope * n.ln()).exp()
    }
}

pub fn fit_exponent(table: &[(f64, f64)]) -> Result<ScalingFit> {
    if table.len() < 3 {
        return Err(Error::TooFewPoints {
            needed: 3,
            found: table.len(),
        });
    }
    for (i, &(n, v)) in table.iter().enumerate() {
        if !(v > 0.0) {
            return Err(Error::NonPositiveValue { index: i, value: v });
        }
        if !(n > 0.0) {
            return Err(Error::NonPositiveValue { index: i, value: n });
        }
    }
    let k = table.len() as f64;
    let xs: Vec<f64> = table.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = table.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 {
        return Err(Error::Hypothesis("fit needs at least two distinct N".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).abs())
        .fold(0.0, f64::max);
    Ok(ScalingFit {
        slope,
        intercept,
        residual,
        points: table.len(),
    })
}
