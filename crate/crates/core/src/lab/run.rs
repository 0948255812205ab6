use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{DensitySpec, ExperimentConfig, ExperimentKind, PointFamily};
use super::fit::{fit_exponent, ScalingFit};
use crate::density::{
    dvp_density, lp_norm, morrey_norm, morrey_norm_dilated_1d, periodized_bump, scale_density, single_mode,
    BumpProfile,
};
use crate::engine::bounds::{lower_bound_scale, BoundMode};
use crate::engine::kernel::{make_kernel, montgomery_certificate};
use crate::engine::{avg_sq, EvalOptions, Method};
use crate::error::{Error, Result};
use crate::jitter::{
    holder_rate_experiment, jitter_closed_form, jitter_mc_with, replicate_seeds, weighting_label, JitterOptions,
    JitterRow, WeightScheme,
};
use crate::spectral::Weighting;
use crate::torus::{cube_partition, grid_points, sample_jitter, weight_norm, TorusPoint, WeightedPointSet};

/// Raw values of a run, one row per evaluated configuration.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }
}

fn num(v: f64) -> String {
    format!("{v:e}")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    /// `(N, value)` pairs responsible for a failure.
    pub offending: Vec<(f64, f64)>,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.into(),
            passed,
            detail,
            offending: Vec::new(),
        }
    }

    fn with_offending(mut self, pairs: Vec<(f64, f64)>) -> Self {
        if !self.passed {
            self.offending = pairs;
        }
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub config_hash: String,
    pub fits: BTreeMap<String, ScalingFit>,
    /// Empirical constants: floors and ceilings of normalized ratios.
    pub constants: BTreeMap<String, f64>,
    pub max_tail_bound: f64,
    pub checks: Vec<Check>,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub config: ExperimentConfig,
    pub table: Table,
    pub summary: Summary,
}

pub fn config_hash(cfg: &ExperimentConfig) -> String {
    hex::encode(Sha256::digest(serde_json::to_vec(cfg).expect("config serializes")))
}

struct Builder {
    table: Table,
    fits: BTreeMap<String, ScalingFit>,
    constants: BTreeMap<String, f64>,
    max_tail: f64,
    checks: Vec<Check>,
}

impl Builder {
    fn new(columns: &[&str]) -> Self {
        Self {
            table: Table::new(columns),
            fits: BTreeMap::new(),
            constants: BTreeMap::new(),
            max_tail: 0.0,
            checks: Vec::new(),
        }
    }

    fn tail(&mut self, t: f64) {
        self.max_tail = self.max_tail.max(t);
    }

    /// Fits `series` and records it; a failed fit becomes a failed check.
    fn fit(&mut self, name: &str, series: &[(f64, f64)]) -> Option<ScalingFit> {
        match fit_exponent(series) {
            Ok(fit) => {
                self.fits.insert(name.into(), fit);
                Some(fit)
            }
            Err(e) => {
                self.checks.push(Check::new(&format!("{name}_fit"), false, e.to_string()).with_offending(series.to_vec()));
                None
            }
        }
    }

    fn slope_check(&mut self, name: &str, series: &[(f64, f64)], expected: f64, tol: f64) {
        if let Some(fit) = self.fit(name, series) {
            let ok = (fit.slope - expected).abs() <= tol;
            self.checks.push(
                Check::new(
                    &format!("{name}_slope"),
                    ok,
                    format!("slope {:.4}, expected {expected:.4} +- {tol}", fit.slope),
                )
                .with_offending(series.to_vec()),
            );
        }
    }

    /// A normalized quantity stays bounded: its fitted growth rate in N does
    /// not exceed `tol`.
    fn bounded_check(&mut self, name: &str, series: &[(f64, f64)], tol: f64) {
        let ceiling = series.iter().map(|p| p.1).fold(0.0, f64::max);
        self.constants.insert(format!("{name}_ceiling"), ceiling);
        let finite = series.iter().all(|p| p.1.is_finite() && p.1 >= 0.0);
        let positive: Vec<(f64, f64)> = series.iter().copied().filter(|p| p.1 > 0.0).collect();
        let (ok, detail) = if !finite {
            (false, "non-finite or negative value".to_string())
        } else if positive.len() >= 3 {
            let fit = fit_exponent(&positive).expect("positive values");
            self.fits.insert(name.into(), fit);
            (
                fit.slope <= tol,
                format!("growth exponent {:.4} (allowed <= {tol}), ceiling {ceiling:e}", fit.slope),
            )
        } else {
            (true, format!("ceiling {ceiling:e}"))
        };
        self.checks.push(Check::new(&format!("{name}_bounded"), ok, detail).with_offending(series.to_vec()));
    }

    fn finish(self, cfg: &ExperimentConfig) -> RunOutput {
        let passed = self.checks.iter().all(|c| c.passed);
        RunOutput {
            config: cfg.clone(),
            table: self.table,
            summary: Summary {
                kind: cfg.kind,
                seed: cfg.seed,
                config_hash: config_hash(cfg),
                fits: self.fits,
                constants: self.constants,
                max_tail_bound: self.max_tail,
                checks: self.checks,
                passed,
            },
        }
    }
}

/// Runs one experiment. Errors for invalid configurations and infeasible
/// truncation budgets; failed invariants are reported in the summary.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    match cfg.kind {
        ExperimentKind::LpLower => lower(cfg, BoundMode::Lp { p: cfg.p }),
        ExperimentKind::MorreyLower => lower(cfg, BoundMode::Morrey { lambda: cfg.lambda }),
        ExperimentKind::LpSharp if cfg.p == 1.0 => l1_collapse(cfg),
        ExperimentKind::LpSharp => lp_sharp(cfg),
        ExperimentKind::MorreySharp => morrey_sharp(cfg),
        ExperimentKind::JitterRates => jitter_rates(cfg),
        ExperimentKind::HolderRates => holder_rates(cfg),
        ExperimentKind::SignedWeights => signed_weights(cfg),
        ExperimentKind::CertificateAudit => certificate_audit(cfg),
    }
}

fn exact() -> EvalOptions {
    EvalOptions::with_method(Method::Pairwise)
}

pub fn uniform_points(n: usize, d: usize, seed: u64) -> Result<WeightedPointSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords: Vec<f64> = (0..n * d).map(|_| rng.gen_range(-0.5..0.5)).collect();
    WeightedPointSet::from_flat(d, &coords, vec![1.0; n])
}

fn lower(cfg: &ExperimentConfig, mode: BoundMode) -> Result<RunOutput> {
    let d = cfg.dim;
    let f = cfg.density.build(d, cfg.seed)?;
    let f_norm = match mode {
        BoundMode::Lp { p } => lp_norm(&f, p)?.value,
        BoundMode::Morrey { lambda } => morrey_norm(&f, lambda)?.value,
    };
    let mut b = Builder::new(&["N", "trial", "value", "scale", "ratio"]);
    b.constants.insert("f_norm".into(), f_norm);
    let seeds = replicate_seeds(cfg.seed, cfg.sizes.len() * cfg.trials);
    let mut floors = Vec::new();
    let mut means = Vec::new();
    for (i, &n) in cfg.sizes.iter().enumerate() {
        let mut floor = f64::INFINITY;
        let mut sum = 0.0;
        for t in 0..cfg.trials {
            let s = seeds[i * cfg.trials + t];
            let ps = match cfg.points {
                PointFamily::Uniform => uniform_points(n, d, s)?,
                PointFamily::Jittered => {
                    let h = super::config::side_for(n, d).expect("validated");
                    sample_jitter(&cube_partition(h, d)?, s)
                }
            };
            let value = avg_sq(&ps, &f, cfg.weighting, &exact())?.value;
            let scale = lower_bound_scale(mode, d, n, weight_norm(&ps), f_norm)?;
            let ratio = value / scale;
            floor = floor.min(ratio);
            sum += value;
            b.table.push(vec![n.to_string(), t.to_string(), num(value), num(scale), num(ratio)]);
        }
        b.constants.insert(format!("floor_N{n}"), floor);
        floors.push((n as f64, floor));
        means.push((n as f64, sum / cfg.trials as f64));
    }
    let lo = floors.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let hi = floors.iter().map(|p| p.1).fold(0.0, f64::max);
    b.constants.insert("floor".into(), lo);
    if means.len() >= 3 {
        b.fit("mean_value", &means);
    }
    b.checks.push(Check::new("ratio_positive", lo > 0.0, format!("smallest ratio {lo:e}")).with_offending(floors.clone()));
    b.checks.push(
        Check::new(
            "floor_stability",
            lo > 0.0 && hi / lo < cfg.floor_spread,
            format!("floors span a factor {:.3} (allowed < {})", hi / lo, cfg.floor_spread),
        )
        .with_offending(floors),
    );
    Ok(b.finish(cfg))
}

fn lp_sharp(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let d = cfg.dim;
    let df = d as f64;
    let q = cfg.p / (cfg.p - 1.0);
    let bump = periodized_bump(cfg.bump_band, BumpProfile::default(), d)?;
    // ‖F(H·)‖_p = ‖F‖_p
    let f_norm = lp_norm(&bump, cfg.p)?.value;
    let mut b = Builder::new(&["H", "N", "M", "value", "f_norm", "normalized"]);
    let mut series = Vec::new();
    for &h in &cfg.sizes {
        let ps = grid_points(h, d)?;
        let f = scale_density(&bump, h)?;
        let value = avg_sq(&ps, &f, cfg.weighting, &exact())?.value;
        let n = ps.len() as f64;
        let normalized = n.powf(1.0 + 1.0 / df) * f_norm.powf(q / df) * value;
        series.push((n, normalized));
        b.table.push(vec![
            h.to_string(),
            ps.len().to_string(),
            num(cfg.bump_band),
            num(value),
            num(f_norm),
            num(normalized),
        ]);
    }
    b.bounded_check("normalized", &series, cfg.slope_tolerance);
    Ok(b.finish(cfg))
}

/// `ε(N) = 1/log(N+2)`.
pub fn collapse_target(n: usize) -> f64 {
    1.0 / ((n + 2) as f64).ln()
}

fn l1_collapse(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let d = cfg.dim;
    let mut b = Builder::new(&["H", "N", "degree", "value", "epsilon", "ratio"]);
    let mut series = Vec::new();
    for &h in &cfg.sizes {
        let n = h.pow(d as u32);
        let eps = collapse_target(n);
        let degree = (1.0 / eps).ceil() as usize;
        let f = dvp_density(degree, d)?;
        let ps = WeightedPointSet::unit_weights(vec![TorusPoint::origin(d)?; n])?;
        let value = avg_sq(&ps, &f, cfg.weighting, &exact())?.value;
        series.push((n as f64, value / eps));
        b.table.push(vec![
            h.to_string(),
            n.to_string(),
            degree.to_string(),
            num(value),
            num(eps),
            num(value / eps),
        ]);
    }
    b.bounded_check("ratio", &series, cfg.slope_tolerance);
    Ok(b.finish(cfg))
}

fn morrey_sharp(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let d = cfg.dim;
    let lambda = cfg.lambda;
    let mut b = Builder::new(&["H", "N", "M", "value", "morrey_norm", "normalized"]);
    let mut series = Vec::new();
    for &h in &cfg.sizes {
        // the bump must sharpen with H for the norm of F(H·) to track M^λ
        let m = (cfg.bump_band * (h as f64).powf((d as f64 - lambda) / lambda)).ceil();
        let bump = periodized_bump(m, BumpProfile::default(), d)?;
        let f = scale_density(&bump, h)?;
        let ps = grid_points(h, d)?;
        let value = avg_sq(&ps, &f, cfg.weighting, &exact())?.value;
        let resolution = (32.0 * m).max(256.0) as usize;
        let norm = morrey_norm_dilated_1d(&bump, h, lambda, resolution)?.value;
        let n = ps.len() as f64;
        let normalized = n.powf(1.0 + 1.0 / lambda) * norm.powf(1.0 / lambda) * value;
        series.push((n, normalized));
        b.table.push(vec![
            h.to_string(),
            ps.len().to_string(),
            num(m),
            num(value),
            num(norm),
            num(normalized),
        ]);
    }
    b.bounded_check("normalized", &series, cfg.slope_tolerance);
    Ok(b.finish(cfg))
}

const JITTER_COLUMNS: [&str; 6] = ["N", "r", "J_closed", "J_mc", "stderr", "tail_bound"];

fn push_jitter_row(b: &mut Builder, row: &JitterRow) {
    let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
    b.table.push(vec![
        row.n.to_string(),
        row.r.clone(),
        num(row.j_closed),
        opt(row.j_mc),
        opt(row.stderr),
        num(row.tail_bound),
    ]);
    b.tail(row.tail_bound);
}

fn jitter_options(cfg: &ExperimentConfig) -> JitterOptions {
    JitterOptions {
        budget: cfg.budget,
        ..JitterOptions::default()
    }
}

fn jitter_rates(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let d = cfg.dim;
    let f = cfg.density.build(d, cfg.seed)?;
    let l2 = f.l2_sq();
    let bm = cfg.weighting.ball_measure(d);
    let unit = cfg.weight_scheme == WeightScheme::Unit;
    let mut b = Builder::new(&JITTER_COLUMNS);
    let mut closed = Vec::new();
    let mut ratios = Vec::new();
    let mut mc_off = Vec::new();
    let seeds = replicate_seeds(cfg.seed, cfg.sizes.len());
    for (i, &h) in cfg.sizes.iter().enumerate() {
        let cells = cube_partition(h, d)?;
        let n = cells.len();
        let mut row = JitterRow {
            n,
            r: weighting_label(&cfg.weighting),
            j_closed: f64::NAN,
            j_mc: None,
            stderr: None,
            tail_bound: 0.0,
        };
        if !unit {
            let est = jitter_closed_form(&cells, &f, cfg.weighting, &jitter_options(cfg))?;
            row.j_closed = est.closed_form.expect("closed form present");
            row.tail_bound = est.tail_bound;
            closed.push((n as f64, row.j_closed));
            ratios.push((n as f64, row.j_closed * n as f64 / l2));
        }
        if cfg.replicates > 0 {
            let mc = jitter_mc_with(&cells, &f, cfg.weighting, cfg.replicates, seeds[i], cfg.weight_scheme)?;
            row.j_mc = mc.mc_value;
            row.stderr = mc.mc_stderr;
            if !unit {
                let (v, s) = (mc.mc_value.unwrap_or(0.0), mc.mc_stderr.unwrap_or(0.0));
                if (v - row.j_closed).abs() > 4.0 * s + row.tail_bound {
                    mc_off.push((n as f64, v));
                }
            }
        }
        push_jitter_row(&mut b, &row);
    }
    if !unit {
        // every cell term is non-negative, so N J / ‖f‖² ≤ |B|
        let ceiling = ratios.iter().map(|p| p.1).fold(0.0, f64::max);
        b.constants.insert("upper_constant".into(), ceiling);
        b.checks.push(
            Check::new(
                "upper_bound",
                ratios.iter().all(|p| p.1 >= 0.0 && p.1 <= bm * (1.0 + 1e-9)),
                format!("max N J / |f|^2 = {ceiling:e}, |B| = {bm:e}"),
            )
            .with_offending(ratios.clone()),
        );
        let lower: Vec<(f64, f64)> = closed
            .iter()
            .map(|&(n, j)| (n, j * n.powf(1.0 + 1.0 / d as f64) / l2))
            .collect();
        b.constants.insert("lower_floor".into(), lower.iter().map(|p| p.1).fold(f64::INFINITY, f64::min));
        let constant = matches!(cfg.density, DensitySpec::Constant { .. });
        if constant && matches!(cfg.weighting, Weighting::Radial { .. }) && closed.len() >= 3 {
            b.slope_check("closed", &closed, -1.0 - 1.0 / d as f64, cfg.slope_tolerance);
        } else if closed.len() >= 3 && closed.iter().all(|p| p.1 > 0.0) {
            b.fit("closed", &closed);
        }
        if cfg.replicates > 0 {
            b.checks.push(
                Check::new(
                    "mc_agreement",
                    mc_off.is_empty(),
                    format!("{} of {} sizes outside 4 stderr", mc_off.len(), cfg.sizes.len()),
                )
                .with_offending(mc_off),
            );
        }
    }
    Ok(b.finish(cfg))
}

/// Rate predicted for Hölder-β densities.
pub fn holder_slope(beta: f64, d: usize) -> f64 {
    if beta < 0.5 {
        -1.0 - 2.0 * beta / d as f64
    } else {
        -1.0 - 1.0 / d as f64
    }
}

fn holder_rates(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let rows = holder_rate_experiment(
        cfg.beta,
        cfg.dim,
        &cfg.sizes,
        cfg.weighting,
        cfg.holder_shape,
        &jitter_options(cfg),
    )?;
    let mut b = Builder::new(&JITTER_COLUMNS);
    for r in &rows {
        push_jitter_row(&mut b, r);
    }
    let series: Vec<(f64, f64)> = rows.iter().map(|r| (r.n as f64, r.j_closed)).collect();
    b.slope_check("closed", &series, holder_slope(cfg.beta, cfg.dim), cfg.slope_tolerance);
    Ok(b.finish(cfg))
}

fn signed_weights(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let d = cfg.dim;
    let origin = TorusPoint::origin(d)?;
    let ps = WeightedPointSet::new(vec![origin.clone(), origin], vec![1.0, -1.0])?;
    let mut b = Builder::new(&["k", "value", "weight", "tail_bound", "method"]);
    let mut series = Vec::new();
    let mut off = Vec::new();
    for &k in &cfg.sizes {
        let mut freq = vec![0i64; d];
        freq[0] = k as i64;
        let f = single_mode(&freq, Complex64::new(1.0, 0.0))?;
        let opts = EvalOptions {
            tolerance: cfg.tolerance,
            budget: cfg.budget,
            ..EvalOptions::default()
        };
        let report = match avg_sq(&ps, &f, cfg.weighting, &opts) {
            Err(Error::BudgetExceeded { .. }) => avg_sq(&ps, &f, cfg.weighting, &exact())?,
            other => other?,
        };
        let w = cfg.weighting.weight(d, k as f64);
        if (report.value - w).abs() > report.tail_bound + 1e-10 * w {
            off.push((k as f64, report.value));
        }
        b.tail(report.tail_bound);
        series.push((k as f64, report.value));
        b.table.push(vec![
            k.to_string(),
            num(report.value),
            num(w),
            num(report.tail_bound),
            serde_json::to_value(report.method)?.as_str().unwrap_or_default().to_string(),
        ]);
    }
    b.checks.push(
        Check::new(
            "value_equals_weight",
            off.is_empty(),
            format!("{} of {} frequencies off", off.len(), cfg.sizes.len()),
        )
        .with_offending(off),
    );
    b.slope_check("value", &series, -(d as f64) - 1.0, cfg.slope_tolerance);
    Ok(b.finish(cfg))
}

fn certificate_audit(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let d = cfg.dim;
    let n_max = *cfg.sizes.last().expect("validated");
    let mut b = Builder::new(&["trial", "N", "M", "spectral", "point_sum", "relative_gap", "bound", "holds"]);
    let mut gaps = Vec::new();
    let mut violations = Vec::new();
    let mut worst_gap: f64 = 0.0;
    for (t, s) in replicate_seeds(cfg.seed, cfg.trials).into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let n = rng.gen_range(1..=n_max);
        let m = rng.gen_range(1..=cfg.max_kernel_bandwidth);
        let mut weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        weights[0] += 0.5;
        let ps = uniform_points(n, d, rng.gen())?.with_weights(weights)?;
        let kernel = make_kernel(cfg.kernel, m, d)?;
        let cert = montgomery_certificate(&ps, &kernel)?;
        worst_gap = worst_gap.max(cert.relative_gap);
        if cert.relative_gap > 1e-9 {
            gaps.push((n as f64, cert.relative_gap));
        }
        if !cert.holds {
            violations.push((n as f64, cert.spectral));
        }
        b.table.push(vec![
            t.to_string(),
            n.to_string(),
            m.to_string(),
            num(cert.spectral),
            num(cert.point_sum),
            num(cert.relative_gap),
            num(cert.bound),
            cert.holds.to_string(),
        ]);
    }
    b.constants.insert("max_relative_gap".into(), worst_gap);
    b.checks.push(
        Check::new("duality", gaps.is_empty(), format!("largest relative gap {worst_gap:e}")).with_offending(gaps),
    );
    b.checks.push(
        Check::new(
            "lower_bound_holds",
            violations.is_empty(),
            format!("{} violations in {} configurations", violations.len(), cfg.trials),
        )
        .with_offending(violations),
    );
    // the inequality has no content for signed weights and must be refused
    let signed = uniform_points(2, d, cfg.seed)?.with_weights(vec![1.0, -1.0])?;
    let refused = matches!(
        montgomery_certificate(&signed, &make_kernel(cfg.kernel, 2, d)?),
        Err(Error::SignedWeights)
    );
    b.checks.push(Check::new("signed_refused", refused, "signed weights must be refused".into()));
    Ok(b.finish(cfg))
}

/// Writes `raw.csv`, `summary.json` and `config_echo.json` into `dir`.
pub fn write_reports(dir: &Path, out: &RunOutput) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("raw.csv"), out.table.to_csv())?;
    std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&out.summary)?)?;
    let echo = serde_json::json!({
        "config": out.config,
        "config_hash": out.summary.config_hash,
        "version": env!("CARGO_PKG_VERSION"),
    });
    std::fs::write(dir.join("config_echo.json"), serde_json::to_string_pretty(&echo)?)?;
    Ok(())
}

/// One line per check, for terminals.
pub fn render_summary(out: &RunOutput) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{} seed={} hash={}", out.config.kind.name(), out.config.seed, &out.summary.config_hash[..12]);
    for (name, fit) in &out.summary.fits {
        let _ = writeln!(s, "  fit {name}: slope {:.4} (max residual {:.3e}, {} points)", fit.slope, fit.residual, fit.points);
    }
    for c in &out.summary.checks {
        let _ = writeln!(s, "  [{}] {}: {}", if c.passed { "ok" } else { "FAIL" }, c.name, c.detail);
    }
    s
}
