//! Command-line front end: `solve`, `contour` and `verify`.
//!
//! Exit codes: 0 success, 1 no saddle found or verification failures,
//! 2 usage or configuration error.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde::{Deserialize, Serialize};

use crate::driver::{solve, SolveConfig, SolveStatus, TraceRecord};
use crate::line1d::Tolerances;
use crate::objective::{builtin, Objective};
use crate::quadmodel::{generate_morse1, QuadraticModel, QuadraticSpec};
use crate::verify::{
    check_grad_formulas, convexity_suite, grad_formulas_suite, hessian_stability_suite, quadratic_oracle_suite,
    GradSuite, ProbeSpread, StabilityExpectation,
};
use crate::{Error, Result, Vector};

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILED: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

/// Plot grid for `contour`: `bounds = [x1_min, x1_max, x2_min, x2_max]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub bounds: [f64; 4],
    pub resolution: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            bounds: [-2.0, 2.0, -2.0, 2.0],
            resolution: 101,
        }
    }
}

/// Run configuration file. Command-line flags override its fields.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Builtin name, or `quadratic` together with `model`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub function: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<QuadraticSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<f64>>,
    #[serde(default)]
    pub solve: SolveConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidConfig(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    /// The objective named by `function` and `model`.
    pub fn objective(&self) -> Result<Objective> {
        match (self.function.as_deref(), &self.model) {
            (Some("quadratic") | None, Some(spec)) => Ok(Objective::quadratic(QuadraticModel::from_spec(spec)?)),
            (Some("quadratic"), None) => Err(Error::InvalidConfig("function quadratic needs a model".into())),
            (Some(name), None) => builtin(name),
            (Some(name), Some(_)) => Err(Error::InvalidConfig(format!(
                "a model was given but function is {name}"
            ))),
            (None, None) => Err(Error::InvalidConfig("no function given".into())),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "mtnpass",
    version,
    about = "Mountain pass saddle search by level-set iterations"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Search for a saddle between two points.
    Solve(SolveArgs),
    /// Write a function grid (and optionally the iterates of a trace) as CSV.
    Contour(ContourArgs),
    /// Run a numerical verification suite.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// six_hump_camel, tightness2d or quadratic.
    #[arg(long)]
    pub function: Option<String>,
    /// JSON quadratic model `{"H": [[..]], "g": [..], "c": ..}`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// First endpoint, comma separated.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_point_arg)]
    pub a: Option<Point>,
    /// Second endpoint, comma separated.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_point_arg)]
    pub b: Option<Point>,
    #[arg(long)]
    pub gtol: Option<f64>,
    #[arg(long)]
    pub xtol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub radius: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ContourArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// `x1_min,x1_max,x2_min,x2_max`.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_point_arg)]
    pub bounds: Option<Point>,
    /// Grid points per axis (at least 2).
    #[arg(long)]
    pub resolution: Option<usize>,
    /// trace.json from `solve`; its iterates are written to iterates.csv.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    GradFormulas,
    HessianStability,
    Convexity,
    QuadraticOracle,
}

impl Suite {
    fn name(self) -> &'static str {
        match self {
            Suite::GradFormulas => "grad-formulas",
            Suite::HessianStability => "hessian-stability",
            Suite::Convexity => "convexity",
            Suite::QuadraticOracle => "quadratic-oracle",
        }
    }
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(value_enum)]
    pub suite: Suite,
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Comma-separated coordinates given on the command line.
#[derive(Clone, Debug, PartialEq)]
pub struct Point(pub Vec<f64>);

fn parse_point_arg(s: &str) -> std::result::Result<Point, String> {
    parse_point(s).map(Point)
}

/// Parses `"1.5,-2,3e-1"`.
pub fn parse_point(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',')
        .map(|p| {
            let p = p.trim();
            let x: f64 = p.parse().map_err(|_| format!("not a number: {p:?}"))?;
            if x.is_finite() {
                Ok(x)
            } else {
                Err(format!("not finite: {p:?}"))
            }
        })
        .collect()
}

/// Sets up logging from `MTNPASS_LOG` (`quiet`, `info` or `debug`; warnings otherwise).
pub fn init_logging() -> Result<()> {
    let level = match std::env::var("MTNPASS_LOG").ok().as_deref() {
        None | Some("") => log::LevelFilter::Warn,
        Some("quiet") => log::LevelFilter::Off,
        Some("info") => log::LevelFilter::Info,
        Some("debug") => log::LevelFilter::Debug,
        Some(other) => {
            return Err(Error::InvalidConfig(format!(
                "MTNPASS_LOG must be quiet, info or debug, got {other:?}"
            )))
        }
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .try_init();
    Ok(())
}

fn base_config(common: &CommonArgs) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(f) = &common.function {
        cfg.function = Some(f.clone());
        if f != "quadratic" && common.model.is_none() {
            cfg.model = None;
        }
    }
    if let Some(path) = &common.model {
        let spec: QuadraticSpec = serde_json::from_str(&fs::read_to_string(path)?)
            .map_err(|e| Error::InvalidModel(format!("{}: {e}", path.display())))?;
        cfg.model = Some(spec);
    }
    if let Some(out) = &common.out {
        cfg.out = Some(out.clone());
    }
    Ok(cfg)
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents)?;
    Ok(path)
}

fn emit(out: Option<&Path>, name: &str, contents: &str) -> Result<()> {
    match out {
        Some(dir) => {
            let path = write_file(dir, name, contents)?;
            info!("wrote {}", path.display());
        }
        None => std::io::stdout().write_all(contents.as_bytes())?,
    }
    Ok(())
}

fn cmd_solve(args: &SolveArgs) -> Result<u8> {
    let mut cfg = base_config(&args.common)?;
    if let Some(Point(a)) = &args.a {
        cfg.a = Some(a.clone());
    }
    if let Some(Point(b)) = &args.b {
        cfg.b = Some(b.clone());
    }
    if let Some(v) = args.gtol {
        cfg.solve.gtol = v;
    }
    if let Some(v) = args.xtol {
        cfg.solve.xtol = v;
    }
    if let Some(v) = args.max_iter {
        cfg.solve.max_iter = v;
    }
    if let Some(v) = args.radius {
        cfg.solve.radius = v;
    }
    cfg.solve.validate()?;
    let obj = cfg.objective()?;
    let (Some(a), Some(b)) = (&cfg.a, &cfg.b) else {
        return Err(Error::InvalidConfig("solve needs both endpoints --a and --b".into()));
    };
    let a = Vector::from_vec(a.clone());
    let b = Vector::from_vec(b.clone());
    let output = solve(&obj, &a, &b, &cfg.solve)?;
    let report = to_json(&output.report)?;
    match cfg.out.as_deref() {
        Some(dir) => {
            write_file(dir, "report.json", &report)?;
            write_file(dir, "trace.json", &to_json(&output.trace)?)?;
            info!("wrote report.json and trace.json to {}", dir.display());
        }
        None => std::io::stdout().write_all(report.as_bytes())?,
    }
    Ok(if output.report.status == SolveStatus::SaddleFound {
        EXIT_OK
    } else {
        EXIT_FAILED
    })
}

/// Grid of `f` over the bounds, `x2` rows outer and `x1` inner, with header `x1,x2,f`.
pub fn contour_csv(obj: &Objective, grid: &GridSpec) -> Result<String> {
    if obj.dim() != 2 {
        return Err(Error::InvalidConfig(format!(
            "contour needs a 2-D function, got dimension {}",
            obj.dim()
        )));
    }
    if grid.resolution < 2 {
        return Err(Error::InvalidConfig(format!(
            "resolution must be at least 2, got {}",
            grid.resolution
        )));
    }
    let [x1_lo, x1_hi, x2_lo, x2_hi] = grid.bounds;
    if !(x1_lo < x1_hi && x2_lo < x2_hi) || grid.bounds.iter().any(|b| !b.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "bounds must be increasing pairs, got {:?}",
            grid.bounds
        )));
    }
    let n = grid.resolution;
    let at = |lo: f64, hi: f64, k: usize| lo + (hi - lo) * k as f64 / (n - 1) as f64;
    let mut csv = String::from("x1,x2,f\n");
    for j in 0..n {
        let x2 = at(x2_lo, x2_hi, j);
        for i in 0..n {
            let x1 = at(x1_lo, x1_hi, i);
            let f = obj.eval_value(&Vector::from_vec(vec![x1, x2]))?;
            writeln!(csv, "{x1},{x2},{f}").expect("write to string");
        }
    }
    Ok(csv)
}

/// Iterate polyline `iter,kind,x1,x2,l,g` from a trace.
pub fn iterates_csv(trace: &[TraceRecord]) -> Result<String> {
    let mut csv = String::from("iter,kind,x1,x2,l,g\n");
    for r in trace {
        if r.x.len() != 2 {
            return Err(Error::InvalidConfig("trace iterates are not 2-D".into()));
        }
        let kind = serde_json::to_value(r.kind)?;
        let kind = kind.as_str().unwrap_or_default();
        writeln!(csv, "{},{},{},{},{},{}", r.iter, kind, r.x[0], r.x[1], r.level, r.g).expect("write to string");
    }
    Ok(csv)
}

fn cmd_contour(args: &ContourArgs) -> Result<u8> {
    let cfg = base_config(&args.common)?;
    let obj = cfg.objective()?;
    let mut grid = cfg.grid.clone().unwrap_or_default();
    if let Some(Point(b)) = &args.bounds {
        grid.bounds = <[f64; 4]>::try_from(b.as_slice())
            .map_err(|_| Error::InvalidConfig(format!("bounds need 4 values, got {}", b.len())))?;
    }
    if let Some(r) = args.resolution {
        grid.resolution = r;
    }
    let csv = contour_csv(&obj, &grid)?;
    let iterates = match &args.trace {
        Some(path) => {
            let trace: Vec<TraceRecord> = serde_json::from_str(&fs::read_to_string(path)?)
                .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
            Some(iterates_csv(&trace)?)
        }
        None => None,
    };
    match (cfg.out.as_deref(), iterates) {
        (Some(dir), iterates) => {
            write_file(dir, "contour.csv", &csv)?;
            if let Some(it) = iterates {
                write_file(dir, "iterates.csv", &it)?;
            }
        }
        (None, None) => std::io::stdout().write_all(csv.as_bytes())?,
        (None, Some(_)) => return Err(Error::InvalidConfig("--trace needs --out".into())),
    }
    Ok(EXIT_OK)
}

fn grad_suite_for(cfg: &RunConfig, seed: u64, tol: &Tolerances) -> Result<GradSuite> {
    match (&cfg.function, &cfg.model) {
        (None, None) => grad_formulas_suite(true, &["six_hump_camel", "tightness2d"], seed, tol),
        (_, Some(_)) => {
            let obj = cfg.objective()?;
            let model = QuadraticModel::from_spec(cfg.model.as_ref().expect("model"))?;
            let (center, _) = model.saddle()?;
            let spread = ProbeSpread {
                offset: 0.5,
                tilt: 0.2,
                level_gap: (0.1, 1.0),
            };
            let report = check_grad_formulas(&obj, &center, &spread, 100.0, 50, 1e-6, seed, tol)?;
            let failures = usize::from(!report.passed());
            Ok(GradSuite {
                reports: vec![report],
                failures,
            })
        }
        (Some(name), None) => {
            builtin(name)?;
            grad_formulas_suite(false, &[name.as_str()], seed, tol)
        }
    }
}

fn cmd_verify(args: &VerifyArgs) -> Result<u8> {
    let cfg = base_config(&args.common)?;
    let seed = args.seed.or(cfg.seed).unwrap_or(0);
    let tol = cfg.solve.steps.tolerances;
    let (json, failures) = match args.suite {
        Suite::GradFormulas => {
            let s = grad_suite_for(&cfg, seed, &tol)?;
            (to_json(&s)?, s.failures)
        }
        Suite::HessianStability => {
            let cases = match (&cfg.function, &cfg.model) {
                (None, None) => {
                    let model = generate_morse1(3, seed, (0.5, 5.0))?;
                    let (xbar, _) = model.saddle()?;
                    vec![
                        (
                            builtin("six_hump_camel")?,
                            Vector::zeros(2),
                            StabilityExpectation::Shrinking,
                        ),
                        (Objective::quadratic(model), xbar, StabilityExpectation::Flat),
                    ]
                }
                (_, Some(spec)) => {
                    let model = QuadraticModel::from_spec(spec)?;
                    let (xbar, _) = model.saddle()?;
                    vec![(Objective::quadratic(model), xbar, StabilityExpectation::Flat)]
                }
                (Some(_), None) => {
                    let obj = cfg.objective()?;
                    let origin = Vector::zeros(obj.dim());
                    vec![(obj, origin, StabilityExpectation::Shrinking)]
                }
            };
            let reports = hessian_stability_suite(&cases, seed, &tol)?;
            let failures = reports.iter().map(|r| r.failures).sum();
            (to_json(&reports)?, failures)
        }
        Suite::Convexity => {
            let s = convexity_suite(seed, &tol)?;
            (to_json(&s)?, s.failures)
        }
        Suite::QuadraticOracle => {
            let s = quadratic_oracle_suite(seed, &tol)?;
            (to_json(&s)?, s.failures)
        }
    };
    info!("{}: {failures} failures", args.suite.name());
    emit(cfg.out.as_deref(), &format!("verify-{}.json", args.suite.name()), &json)?;
    Ok(if failures == 0 { EXIT_OK } else { EXIT_FAILED })
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: &Cli) -> u8 {
    let result = init_logging().and_then(|()| match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Contour(a) => cmd_contour(a),
        Command::Verify(a) => cmd_verify(a),
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}
