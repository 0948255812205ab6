use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use torusdisc::engine::{avg_sq, EvalOptions, Method};
use torusdisc::lab::run::render_summary;
use torusdisc::lab::{run, write_reports, ExperimentConfig, ExperimentKind};
use torusdisc::WeightedPointSet;

/// Ball discrepancy experiments on the flat torus.
#[derive(Parser)]
#[command(name = "torusdisc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Lower-bound and sharpness experiments for L^p densities; with
    /// `--points`, evaluate one point set instead.
    Discrepancy {
        #[command(flatten)]
        common: Common,
        /// Point set file: a `dim N` header, then `dim` coordinates and a weight per line.
        #[arg(long)]
        points: Option<PathBuf>,
        /// Evaluation route for `--points`.
        #[arg(long, value_parser = parse_method, default_value = "spectral")]
        method: Method,
    },
    /// Any experiment kind; reports the fitted exponents.
    Scaling(Common),
    /// Jittered sampling rates (constant or Hölder densities).
    Jitter(Common),
    /// Morrey-space lower bound and sharpness experiments.
    Morrey(Common),
    /// Audit of the energy lower bound on random non-negative weights.
    Certify(Common),
    /// Signed weights with vanishing sum: the lower bound fails.
    SignedDemo(Common),
}

#[derive(Args, Clone, Default)]
struct Common {
    /// JSON experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Experiment kind, overriding the config file.
    #[arg(long)]
    kind: Option<String>,
    /// Dimension, overriding the config file.
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for raw.csv, summary.json and config_echo.json.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Truncation tolerance for spectral sums.
    #[arg(long)]
    tolerance: Option<f64>,
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("unknown method {s:?} (spectral, pairwise, direct)"))
}

fn parse_kind(s: &str) -> Result<ExperimentKind> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .with_context(|| format!("unknown experiment kind {s:?}"))
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Discrepancy { common, .. } => common,
            Command::Scaling(c) | Command::Jitter(c) | Command::Morrey(c) | Command::Certify(c) | Command::SignedDemo(c) => c,
        }
    }

    /// Kinds the subcommand accepts; the first is its default.
    fn kinds(&self) -> &'static [ExperimentKind] {
        use ExperimentKind::*;
        match self {
            Command::Discrepancy { .. } => &[LpLower, LpSharp],
            Command::Scaling(_) => &[
                LpSharp,
                LpLower,
                MorreyLower,
                MorreySharp,
                JitterRates,
                HolderRates,
                SignedWeights,
                CertificateAudit,
            ],
            Command::Jitter(_) => &[JitterRates, HolderRates],
            Command::Morrey(_) => &[MorreyLower, MorreySharp],
            Command::Certify(_) => &[CertificateAudit],
            Command::SignedDemo(_) => &[SignedWeights],
        }
    }
}

fn load_config(cmd: &Command) -> Result<ExperimentConfig> {
    let common = cmd.common();
    let allowed = cmd.kinds();
    let mut cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            ExperimentConfig::from_json(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => {
            let kind = match &common.kind {
                Some(k) => parse_kind(k)?,
                None => allowed[0],
            };
            ExperimentConfig::for_kind(kind)
        }
    };
    if let Some(k) = &common.kind {
        let kind = parse_kind(k)?;
        if kind != cfg.kind {
            let mut fresh = ExperimentConfig::for_kind(kind);
            fresh.dim = cfg.dim;
            fresh.seed = cfg.seed;
            cfg = fresh;
        }
    }
    if let Some(d) = common.dim {
        cfg.dim = d;
        cfg.holder_shape = torusdisc::density::HolderShape::default_for(d);
        if cfg.kind == ExperimentKind::MorreyLower && common.config.is_none() {
            cfg.lambda = d as f64;
        }
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(t) = common.tolerance {
        cfg.tolerance = t;
    }
    if !allowed.contains(&cfg.kind) {
        let names: Vec<&str> = allowed.iter().map(|k| k.name()).collect();
        bail!("kind {} is not handled by this subcommand (expected one of {})", cfg.kind.name(), names.join(", "));
    }
    Ok(cfg)
}

fn evaluate_points(cfg: &ExperimentConfig, path: &Path, method: Method) -> Result<()> {
    let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let ps = WeightedPointSet::read_text(std::io::BufReader::new(file))?;
    let f = cfg.density.build(ps.dim(), cfg.seed)?;
    let opts = EvalOptions {
        method,
        tolerance: cfg.tolerance,
        budget: cfg.budget,
        ..EvalOptions::default()
    };
    let report = avg_sq(&ps, &f, cfg.weighting, &opts)?;
    println!("{}", report.to_json_line());
    Ok(())
}

fn main_inner(cli: Cli) -> Result<bool> {
    let common = cli.command.common().clone();
    if let Some(k) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let cfg = load_config(&cli.command)?;
    if let Command::Discrepancy {
        points: Some(path),
        method,
        ..
    } = &cli.command
    {
        evaluate_points(&cfg, path, *method)?;
        return Ok(true);
    }
    let out = run(&cfg)?;
    write_reports(&common.out, &out).with_context(|| format!("writing reports to {}", common.out.display()))?;
    print!("{}", render_summary(&out));
    println!("reports written to {}", common.out.display());
    Ok(out.summary.passed)
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
