use serde::{Deserialize, Serialize};

use crate::density::{constant_density, fejer_density, random_real_trig, DensityField, HolderShape};
use crate::engine::kernel::KernelFamily;
use crate::error::{Error, Result};
use crate::jitter::WeightScheme;
use crate::spectral::{Weighting, DEFAULT_FREQ_BUDGET};
use crate::torus::check_dim;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    LpLower,
    LpSharp,
    MorreyLower,
    MorreySharp,
    JitterRates,
    HolderRates,
    SignedWeights,
    CertificateAudit,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        ExperimentKind::LpLower,
        ExperimentKind::LpSharp,
        ExperimentKind::MorreyLower,
        ExperimentKind::MorreySharp,
        ExperimentKind::JitterRates,
        ExperimentKind::HolderRates,
        ExperimentKind::SignedWeights,
        ExperimentKind::CertificateAudit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::LpLower => "lp_lower",
            ExperimentKind::LpSharp => "lp_sharp",
            ExperimentKind::MorreyLower => "morrey_lower",
            ExperimentKind::MorreySharp => "morrey_sharp",
            ExperimentKind::JitterRates => "jitter_rates",
            ExperimentKind::HolderRates => "holder_rates",
            ExperimentKind::SignedWeights => "signed_weights",
            ExperimentKind::CertificateAudit => "certificate_audit",
        }
    }
}

/// Density used by the experiments that take an arbitrary one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensitySpec {
    Constant { value: f64 },
    RandomTrig { bandwidth: i64 },
    Fejer { order: usize },
}

impl DensitySpec {
    pub fn build(&self, d: usize, seed: u64) -> Result<DensityField> {
        match *self {
            DensitySpec::Constant { value } => constant_density(value, d),
            DensitySpec::RandomTrig { bandwidth } => random_real_trig(d, bandwidth, seed),
            DensitySpec::Fejer { order } => fejer_density(order, &vec![0.0; d]),
        }
    }

    /// Whether the built density is certainly non-negative.
    pub fn nonneg(&self) -> bool {
        match *self {
            DensitySpec::Constant { value } => value >= 0.0,
            DensitySpec::RandomTrig { .. } => false,
            DensitySpec::Fejer { .. } => true,
        }
    }
}

/// How the lower-bound experiments draw their point sets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointFamily {
    /// Independent uniform points.
    Uniform,
    /// One uniform point per cube of the `N^{1/d}` grid.
    Jittered,
}

/// Unquantified constants of the bandwidth choices.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Constants {
    pub c: f64,
    pub c1: f64,
    pub c2: f64,
}

impl Default for Constants {
    fn default() -> Self {
        Self { c: 1.0, c1: 1.0, c2: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub kind: ExperimentKind,
    pub dim: usize,
    /// N for the random-point kinds, H for the grid and jitter kinds, k for
    /// `signed_weights`, maximal N for `certificate_audit`.
    pub sizes: Vec<usize>,
    pub density: DensitySpec,
    pub weighting: Weighting,
    pub p: f64,
    pub lambda: f64,
    pub beta: f64,
    pub kernel: KernelFamily,
    /// Largest kernel bandwidth for `certificate_audit`.
    pub max_kernel_bandwidth: usize,
    pub seed: u64,
    /// Truncation target for spectral sums.
    pub tolerance: f64,
    pub budget: u64,
    /// Random configurations per size.
    pub trials: usize,
    /// Monte Carlo replicates for jittered sampling (0 skips Monte Carlo).
    pub replicates: usize,
    /// Bandwidth `M` of the bump in the sharpness constructions.
    pub bump_band: f64,
    pub points: PointFamily,
    pub weight_scheme: WeightScheme,
    pub holder_shape: HolderShape,
    pub slope_tolerance: f64,
    /// Largest allowed ratio between floors of different sizes.
    pub floor_spread: f64,
    pub constants: Constants,
}

impl ExperimentConfig {
    pub fn for_kind(kind: ExperimentKind) -> Self {
        let base = Self {
            schema_version: SCHEMA_VERSION,
            kind,
            dim: 1,
            sizes: vec![16, 64, 256],
            density: DensitySpec::Constant { value: 1.0 },
            weighting: Weighting::Radial { a: 0.1, b: 0.4 },
            p: 2.0,
            lambda: 1.0,
            beta: 1.0,
            kernel: KernelFamily::default(),
            max_kernel_bandwidth: 32,
            seed: 0,
            tolerance: 1e-8,
            budget: DEFAULT_FREQ_BUDGET,
            trials: 8,
            replicates: 0,
            bump_band: 2.0,
            points: PointFamily::Jittered,
            weight_scheme: WeightScheme::Density,
            holder_shape: HolderShape::default_for(1),
            slope_tolerance: 0.15,
            floor_spread: 10.0,
            constants: Constants::default(),
        };
        match kind {
            ExperimentKind::LpLower | ExperimentKind::MorreyLower => base,
            ExperimentKind::LpSharp => Self {
                sizes: vec![4, 8, 16, 32],
                weighting: Weighting::Fixed { r: 0.23 },
                ..base
            },
            ExperimentKind::MorreySharp => Self {
                sizes: vec![4, 8, 16],
                weighting: Weighting::Fixed { r: 0.23 },
                lambda: 0.5,
                bump_band: 1.0,
                ..base
            },
            ExperimentKind::JitterRates => Self {
                sizes: vec![2, 4, 8, 16],
                slope_tolerance: 0.10,
                ..base
            },
            ExperimentKind::HolderRates => Self {
                sizes: vec![4, 8, 16, 32, 64],
                ..base
            },
            ExperimentKind::SignedWeights => Self {
                sizes: (1..=32).collect(),
                slope_tolerance: 0.3,
                ..base
            },
            ExperimentKind::CertificateAudit => Self {
                sizes: vec![256],
                trials: 50,
                ..base
            },
        }
    }

    /// Parses a JSON config; absent fields take the defaults of its kind.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let obj = value
            .as_object()
            .ok_or_else(|| Error::Parse("config must be a JSON object".into()))?;
        let kind: ExperimentKind = serde_json::from_value(
            obj.get("kind")
                .cloned()
                .ok_or_else(|| Error::Parse("config needs a \"kind\" field".into()))?,
        )?;
        let mut merged = serde_json::to_value(Self::for_kind(kind))?;
        if obj.get("dim").and_then(|v| v.as_u64()).is_some_and(|d| d != 1) && !obj.contains_key("holder_shape") {
            let d = obj["dim"].as_u64().unwrap_or(1) as usize;
            merged["holder_shape"] = serde_json::to_value(HolderShape::default_for(d))?;
        }
        if kind == ExperimentKind::MorreyLower && !obj.contains_key("lambda") {
            merged["lambda"] = obj.get("dim").cloned().unwrap_or(serde_json::json!(1)).as_u64().unwrap_or(1).into();
        }
        for (k, v) in obj {
            merged[k] = v.clone();
        }
        let cfg: Self = serde_json::from_value(merged)?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Refuses configurations outside the hypotheses of the result the
    /// experiment reproduces.
    pub fn validate(&self) -> Result<()> {
        let bad = |name: &'static str, value: f64, reason: &'static str| Err(Error::InvalidParameter { name, value, reason });
        if self.schema_version != SCHEMA_VERSION {
            return bad("schema_version", self.schema_version as f64, "unsupported schema version");
        }
        let d = check_dim(self.dim)?;
        let df = d as f64;
        self.weighting.validate()?;
        if self.sizes.is_empty() {
            return Err(Error::Hypothesis("sizes must not be empty".into()));
        }
        if self.sizes.windows(2).any(|w| w[0] >= w[1]) || self.sizes[0] == 0 {
            return Err(Error::Hypothesis("sizes must be positive and strictly increasing".into()));
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return bad("tolerance", self.tolerance, "must be positive");
        }
        if self.trials == 0 {
            return bad("trials", 0.0, "need at least one trial");
        }
        if self.replicates != 0 && self.replicates < crate::jitter::MIN_REPLICATES {
            return bad("replicates", self.replicates as f64, "use 0 or at least 100");
        }
        if !(self.slope_tolerance > 0.0) {
            return bad("slope_tolerance", self.slope_tolerance, "must be positive");
        }
        if !(self.floor_spread >= 1.0) {
            return bad("floor_spread", self.floor_spread, "must be at least 1");
        }
        let c = self.constants;
        if !(c.c > 0.0 && c.c1 > 0.0 && c.c2 > 0.0) {
            return bad("constants", c.c.min(c.c1).min(c.c2), "must be positive");
        }
        match self.kind {
            ExperimentKind::LpLower => {
                if !(self.p > 1.0 && self.p <= 2.0) {
                    return bad("p", self.p, "need 1 < p <= 2");
                }
                self.check_point_sizes()?;
            }
            ExperimentKind::MorreyLower => {
                if !(self.lambda > 0.0 && self.lambda <= df) {
                    return bad("lambda", self.lambda, "need 0 < lambda <= d");
                }
                if !self.density.nonneg() {
                    return Err(Error::Hypothesis("the Morrey lower bound needs a non-negative density".into()));
                }
                self.check_point_sizes()?;
            }
            ExperimentKind::LpSharp => {
                if !(self.p >= 1.0 && self.p <= 2.0) {
                    return bad("p", self.p, "need 1 <= p <= 2");
                }
                if !(self.bump_band >= 1.0) {
                    return bad("bump_band", self.bump_band, "need M >= 1");
                }
            }
            ExperimentKind::MorreySharp => {
                if !(self.lambda > 0.0 && self.lambda < df) {
                    return bad("lambda", self.lambda, "need 0 < lambda < d");
                }
                if d != 1 {
                    return Err(Error::Hypothesis("morrey_sharp is implemented for d = 1 only".into()));
                }
                if !(self.bump_band >= 1.0) {
                    return bad("bump_band", self.bump_band, "need M >= 1");
                }
            }
            ExperimentKind::JitterRates => {}
            ExperimentKind::HolderRates => {
                if !(self.beta > 0.0 && self.beta <= 1.0) {
                    return bad("beta", self.beta, "need 0 < beta <= 1");
                }
                if self.sizes.len() < 3 {
                    return Err(Error::Hypothesis("a rate fit needs at least three sizes".into()));
                }
            }
            ExperimentKind::SignedWeights => {
                if self.sizes.len() < 3 {
                    return Err(Error::Hypothesis("a rate fit needs at least three frequencies".into()));
                }
            }
            ExperimentKind::CertificateAudit => {
                if self.max_kernel_bandwidth == 0 {
                    return bad("max_kernel_bandwidth", 0.0, "need M >= 1");
                }
            }
        }
        Ok(())
    }

    fn check_point_sizes(&self) -> Result<()> {
        if self.points == PointFamily::Jittered {
            for &n in &self.sizes {
                if side_for(n, self.dim).is_none() {
                    return Err(Error::Hypothesis(format!(
                        "jittered point sets need N to be a perfect {}-th power, got {n}",
                        self.dim
                    )));
                }
            }
        }
        Ok(())
    }
}

/// `H` with `H^d = n`, if any.
pub fn side_for(n: usize, d: usize) -> Option<usize> {
    let h = (n as f64).powf(1.0 / d as f64).round() as usize;
    (h.max(1)..=h + 1).find(|&h| h.pow(d as u32) == n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        for kind in ExperimentKind::ALL {
            ExperimentConfig::for_kind(kind).validate().unwrap();
        }
    }

    #[test]
    fn json_round_trip_and_merge() {
        let cfg = ExperimentConfig::from_json(r#"{"kind":"lp_lower","dim":2,"p":1.5}"#).unwrap();
        assert_eq!(cfg.dim, 2);
        assert_eq!(cfg.p, 1.5);
        assert_eq!(cfg.sizes, vec![16, 64, 256]);
        assert_eq!(cfg.holder_shape, HolderShape::default_for(2));
        let back = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
        let m = ExperimentConfig::from_json(r#"{"kind":"morrey_lower","dim":2}"#).unwrap();
        assert_eq!(m.lambda, 2.0);
    }

    #[test]
    fn rejects_hypothesis_violations() {
        let parse = |s: &str| ExperimentConfig::from_json(s).and_then(|c| c.validate());
        assert!(parse(r#"{"kind":"lp_lower","p":1.0}"#).is_err());
        assert!(parse(r#"{"kind":"lp_lower","p":2.5}"#).is_err());
        assert!(parse(r#"{"kind":"morrey_lower","lambda":1.5}"#).is_err());
        assert!(parse(r#"{"kind":"morrey_lower","density":{"kind":"random_trig","bandwidth":3}}"#).is_err());
        assert!(parse(r#"{"kind":"morrey_sharp","lambda":1.0}"#).is_err());
        assert!(parse(r#"{"kind":"holder_rates","beta":0.0}"#).is_err());
        assert!(parse(r#"{"kind":"lp_lower","weighting":{"mode":"radial","a":0.3,"b":0.2}}"#).is_err());
        assert!(parse(r#"{"kind":"lp_lower","dim":2,"sizes":[16,32]}"#).is_err());
        assert!(parse(r#"{"kind":"lp_lower","schema_version":2}"#).is_err());
        assert!(parse(r#"{"kind":"lp_lower","bogus":1}"#).is_err());
        assert!(parse(r#"{"kind":"jitter_rates","replicates":10}"#).is_err());
    }

    #[test]
    fn perfect_powers() {
        assert_eq!(side_for(64, 2), Some(8));
        assert_eq!(side_for(64, 3), Some(4));
        assert_eq!(side_for(32, 2), None);
        assert_eq!(side_for(1, 3), Some(1));
    }
}
