//! Command-line front end: argument and config parsing, table output as CSV
//! or JSON, and the exit-code contract (0 pass, 1 check failure, 2 usage).

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use crate::bounds::{
    certify_claim, certify_euler, certify_gamma_identity, certify_hyp_derivative, certify_merk,
    certify_theta_ode, theta_n2, ThetaProfile,
};
use crate::concentration::{concentration_quotient, fuzz_main_inequality, DomainSpec, TestFunction};
use crate::config::NumericsConfig;
use crate::error::Error;
use crate::geometry::{radius_from_volume, MobiusMap};
use crate::report::ResidualReport;
use crate::wavelet::{
    find_negativity_witness, limit_positive_range, ode_residual, limit_expression, boundary_limits,
    WindowKind, WindowSpec, WitnessGrid,
};
use crate::weights::{certify_weight_ode, phi_closed_form, phi_with, WeightParams};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "BERGMAN_FK_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "bergman-fk", version, about = "Concentration bounds for hyperbolic Bergman spaces on the unit ball")]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Default)]
struct CommonArgs {
    /// Dimension of the ball [default: 3]
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Weight exponent, must exceed 1 [default: 2]
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Master seed for all random streams [default: 20240601]
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte Carlo samples per estimate [default: 100000]
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Relative tolerance of the tanh-sinh rule [default: 1e-13]
    #[arg(long, global = true)]
    quad_tol: Option<f64>,
    /// Maximum tanh-sinh levels [default: 12]
    #[arg(long, global = true)]
    quad_levels: Option<usize>,
    /// Relative tail bound for hypergeometric series [default: 1e-16]
    #[arg(long, global = true)]
    series_eps: Option<f64>,
    /// Term cap for hypergeometric series [default: 200000]
    #[arg(long, global = true)]
    series_max_terms: Option<usize>,
    /// Base finite-difference step [default: 1e-3]
    #[arg(long, global = true)]
    fd_step: Option<f64>,
    /// Standard error above which Monte Carlo results warn [default: 1e-2]
    #[arg(long, global = true)]
    mc_tolerance: Option<f64>,
    /// Euclidean radius at which sampling is truncated [default: from the tail bound]
    #[arg(long, global = true)]
    r_max: Option<f64>,
    /// Output format [default: csv for phi and theta, json otherwise]
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Output file [default: stdout, or $BERGMAN_FK_OUT_DIR/<command>.<ext>]
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Flat key=value file; keys are flag names without dashes
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Record wall-clock time in JSON output
    #[arg(long, global = true)]
    timing: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Tabulate the weight Φₙ against its closed form where one exists
    Phi {
        /// Radii: `a:b:step`, `log:a:b:count`, or a comma list
        #[arg(long, default_value = "0:0.99:0.01")]
        grid: String,
    },
    /// Tabulate the bound θ(s)
    Theta {
        /// Measures: `a:b:step`, `log:a:b:count`, or a comma list
        #[arg(long, default_value = "log:0.01:1000:41")]
        grid: String,
    },
    /// Run residual certifications
    Certify {
        #[arg(value_enum)]
        which: Certification,
    },
    /// Concentration quotient of a test function on a domain
    Concentrate {
        /// e.g. `one`, `exp(-1;1,0,0)*extremizer(0.3,0,0)^2`
        #[arg(long, default_value = "one")]
        f: String,
        /// `ball:s=S`, `mball:s=S;a=A1,..,An`, or `cap:c=C;rho=R`
        #[arg(long)]
        omega: String,
    },
    /// Randomized checks of the main inequality
    Fuzz {
        #[arg(long, default_value_t = 200)]
        trials: usize,
        /// Extremal trials checked for equality
        #[arg(long, default_value_t = 20)]
        equality_trials: usize,
    },
    /// Wavelet-window computations
    Wavelet {
        #[arg(value_enum)]
        which: WaveletTask,
        /// Window exponent for `ode` [default: n/2 + 1/2]
        #[arg(long)]
        beta: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Certification {
    WeightOde,
    ThetaOde,
    Merk,
    Claim,
    Euler,
    GammaIdentity,
    HypDerivative,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum WaveletTask {
    Witness,
    Ode,
    Limits,
}

/// Fully resolved settings of one invocation.
#[derive(Debug, Clone, serde::Serialize)]
pub struct RunConfig {
    pub n: usize,
    pub alpha: f64,
    pub numerics: NumericsConfig,
    pub format: &'static str,
    pub out: Option<PathBuf>,
    pub timing: bool,
}

/// An invalid command line or config file.
#[derive(Debug)]
struct UsageError(String);

impl From<Error> for UsageError {
    fn from(e: Error) -> Self {
        UsageError(e.to_string())
    }
}

const CONFIG_KEYS: [&str; 14] = [
    "n",
    "alpha",
    "seed",
    "samples",
    "quad-tol",
    "quad-levels",
    "series-eps",
    "series-max-terms",
    "fd-step",
    "mc-tolerance",
    "r-max",
    "format",
    "out",
    "timing",
];

fn parse_config_file(text: &str) -> Result<BTreeMap<String, String>, UsageError> {
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| UsageError(format!("config line {}: expected key=value", i + 1)))?;
        let key = k.trim().replace('_', "-");
        if !CONFIG_KEYS.contains(&key.as_str()) {
            return Err(UsageError(format!("config line {}: unknown key `{}`", i + 1, k.trim())));
        }
        map.insert(key, v.trim().to_string());
    }
    Ok(map)
}

fn pick<T: std::str::FromStr>(
    flag: Option<T>,
    file: &BTreeMap<String, String>,
    key: &str,
) -> Result<Option<T>, UsageError> {
    if flag.is_some() {
        return Ok(flag);
    }
    match file.get(key) {
        None => Ok(None),
        Some(v) => v
            .parse()
            .map(Some)
            .map_err(|_| UsageError(format!("config key `{key}`: cannot parse `{v}`"))),
    }
}

fn resolve(common: &CommonArgs, command: &str) -> Result<RunConfig, UsageError> {
    let file = match &common.config {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| UsageError(format!("cannot read config {}: {e}", p.display())))?;
            parse_config_file(&text)?
        }
        None => BTreeMap::new(),
    };
    let d = NumericsConfig::default();
    let numerics = NumericsConfig {
        quad_tol: pick(common.quad_tol, &file, "quad-tol")?.unwrap_or(d.quad_tol),
        quad_levels: pick(common.quad_levels, &file, "quad-levels")?.unwrap_or(d.quad_levels),
        series_eps: pick(common.series_eps, &file, "series-eps")?.unwrap_or(d.series_eps),
        series_max_terms: pick(common.series_max_terms, &file, "series-max-terms")?.unwrap_or(d.series_max_terms),
        fd_step: pick(common.fd_step, &file, "fd-step")?.unwrap_or(d.fd_step),
        seed: pick(common.seed, &file, "seed")?.unwrap_or(d.seed),
        samples: pick(common.samples, &file, "samples")?.unwrap_or(d.samples),
        r_max: pick(common.r_max, &file, "r-max")?.or(d.r_max),
        mc_tolerance: pick(common.mc_tolerance, &file, "mc-tolerance")?.unwrap_or(d.mc_tolerance),
    };
    numerics.validate()?;
    let format = match (common.format, file.get("format").map(String::as_str)) {
        (Some(f), _) => f,
        (None, None) if matches!(command, "phi" | "theta") => Format::Csv,
        (None, None) | (None, Some("json")) => Format::Json,
        (None, Some("csv")) => Format::Csv,
        (None, Some(other)) => return Err(UsageError(format!("config key `format`: unknown format `{other}`"))),
    };
    let ext = match format {
        Format::Csv => "csv",
        Format::Json => "json",
    };
    let out = match pick(common.out.clone(), &file, "out")? {
        Some(p) => Some(p),
        None => std::env::var_os(OUT_DIR_ENV).map(|dir| PathBuf::from(dir).join(format!("{command}.{ext}"))),
    };
    let n = pick(common.n, &file, "n")?.unwrap_or(3);
    let alpha = pick(common.alpha, &file, "alpha")?.unwrap_or(2.0);
    if n < 1 {
        return Err(UsageError("n must be at least 1".into()));
    }
    if !(alpha > 1.0) {
        return Err(UsageError(format!("alpha = {alpha} must exceed 1")));
    }
    Ok(RunConfig {
        n,
        alpha,
        numerics,
        format: ext,
        out,
        timing: common.timing || pick(None, &file, "timing")?.unwrap_or(false),
    })
}

/// Parses `a:b:step`, `log:a:b:count`, or a comma-separated list.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, String> {
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| format!("bad number `{s}` in grid `{spec}`"));
    let parts: Vec<&str> = spec.split(':').collect();
    let grid: Vec<f64> = match parts.as_slice() {
        ["log", a, b, k] => {
            let (a, b) = (num(a)?, num(b)?);
            let k: usize = k.trim().parse().map_err(|_| format!("bad count in grid `{spec}`"))?;
            if !(a > 0.0 && b > a) || k < 2 {
                return Err(format!("log grid `{spec}` needs 0 < a < b and count >= 2"));
            }
            (0..k).map(|i| a * (b / a).powf(i as f64 / (k - 1) as f64)).collect()
        }
        [a, b, step] => {
            let (a, b, step) = (num(a)?, num(b)?, num(step)?);
            if !(step > 0.0) || b < a {
                return Err(format!("grid `{spec}` needs a <= b and a positive step"));
            }
            let count = ((b - a) / step + 1e-9).floor() as usize + 1;
            (0..count).map(|i| a + i as f64 * step).collect()
        }
        [_] => spec.split(',').map(num).collect::<Result<_, _>>()?,
        _ => return Err(format!("cannot parse grid `{spec}`")),
    };
    if grid.is_empty() {
        return Err(format!("grid `{spec}` is empty"));
    }
    Ok(grid)
}

fn parse_vector(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|c| c.trim().parse::<f64>().map_err(|_| format!("bad vector component `{c}`")))
        .collect()
}

/// Parses test-function specs such as `exp(-1;1,0,0)*extremizer(0.3,0,0)^2`.
pub fn parse_test_function(spec: &str, params: &WeightParams) -> Result<TestFunction, String> {
    let mut factors = Vec::new();
    for raw in spec.split('*') {
        let raw = raw.trim();
        let (base, power) = match raw.rsplit_once('^') {
            Some((b, p)) if !b.ends_with('(') => (b.trim(), Some(p.trim().parse::<f64>().map_err(|_| format!("bad power in `{raw}`"))?)),
            _ => (raw, None),
        };
        let args = |name: &str| -> Option<&str> { base.strip_prefix(name)?.strip_prefix('(')?.strip_suffix(')') };
        let f = if base == "one" {
            TestFunction::One
        } else if let Some(a) = args("extremizer") {
            let map = MobiusMap::involution(parse_vector(a)?).map_err(|e| e.to_string())?;
            TestFunction::extremizer(map, params).map_err(|e| e.to_string())?
        } else if let Some(a) = args("exp") {
            let (lambda, zeta) = a.split_once(';').ok_or_else(|| format!("`{base}`: expected exp(lambda;zeta)"))?;
            let lambda = lambda.trim().parse::<f64>().map_err(|_| format!("bad lambda in `{base}`"))?;
            TestFunction::exp_harmonic(lambda, parse_vector(zeta)?).map_err(|e| e.to_string())?
        } else {
            return Err(format!("unknown test function `{base}`"));
        };
        let f = match power {
            Some(p) => TestFunction::power(f, p).map_err(|e| e.to_string())?,
            None => f,
        };
        if f.dim().is_some_and(|d| d != params.n) {
            return Err(format!("`{raw}` has dimension {}, expected {}", f.dim().unwrap(), params.n));
        }
        factors.push(f);
    }
    Ok(if factors.len() == 1 { factors.pop().unwrap() } else { TestFunction::Product(factors) })
}

/// Parses domain specs `ball:s=S`, `mball:s=S;a=..`, `cap:c=C;rho=R`.
pub fn parse_domain(spec: &str, n: usize, cfg: &NumericsConfig) -> Result<DomainSpec, String> {
    let (kind, rest) = spec.split_once(':').ok_or_else(|| format!("domain `{spec}`: expected kind:key=value"))?;
    let mut kv = BTreeMap::new();
    for item in rest.split(';') {
        let (k, v) = item.split_once('=').ok_or_else(|| format!("domain `{spec}`: expected key=value"))?;
        kv.insert(k.trim(), v.trim());
    }
    let get = |k: &str| -> Result<f64, String> {
        kv.get(k)
            .ok_or_else(|| format!("domain `{spec}`: missing `{k}`"))?
            .parse::<f64>()
            .map_err(|_| format!("domain `{spec}`: bad `{k}`"))
    };
    let positive = |k: &str| -> Result<f64, String> {
        let v = get(k)?;
        if v > 0.0 {
            Ok(v)
        } else {
            Err(format!("domain `{spec}`: `{k}` must be positive"))
        }
    };
    match kind {
        "ball" => Ok(DomainSpec::CenteredBall { s: positive("s")? }),
        "mball" => {
            let a = parse_vector(kv.get("a").ok_or_else(|| format!("domain `{spec}`: missing `a`"))?)?;
            if a.len() != n {
                return Err(format!("domain `{spec}`: center has dimension {}, expected {n}", a.len()));
            }
            let map = MobiusMap::involution(a).map_err(|e| e.to_string())?;
            Ok(DomainSpec::MobiusBall { map, s: positive("s")? })
        }
        "cap" => Ok(DomainSpec::half_space_cap(n, get("c")?, positive("rho")?, cfg.samples, cfg.seed)),
        _ => Err(format!("unknown domain kind `{kind}`")),
    }
}

/// A table cell.
#[derive(Debug, Clone)]
enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Bool(bool),
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(x) => fmt_num(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => {
                if s.contains([',', '"', '\n']) {
                    format!("\"{}\"", s.replace('"', "\"\""))
                } else {
                    s.clone()
                }
            }
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(x) => num_json(*x),
            Cell::Int(i) => json!(i),
            Cell::Text(s) => json!(s),
            Cell::Bool(b) => json!(b),
            Cell::Empty => Value::Null,
        }
    }
}

/// Scientific notation with 17 significant digits.
fn fmt_num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

fn num_json(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        json!(x.to_string())
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}
impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Num)
    }
}
impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}
impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Bool(x)
    }
}
impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}
impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}

/// Result of one subcommand: a table, an optional summary, and failures.
#[derive(Debug, Default)]
struct Outcome {
    columns: Vec<&'static str>,
    rows: Vec<Vec<Cell>>,
    summary: Option<Value>,
    failures: Vec<Value>,
}

impl Outcome {
    fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            ..Default::default()
        }
    }

    fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::csv).collect();
            let _ = writeln!(s, "{}", cells.join(","));
        }
        s
    }

    fn json(&self, config: &RunConfig, timing: Option<f64>) -> String {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let mut m = Map::new();
                for (c, v) in self.columns.iter().zip(row) {
                    m.insert(c.to_string(), v.json());
                }
                Value::Object(m)
            })
            .collect();
        let mut results = Map::new();
        results.insert("rows".into(), Value::Array(rows));
        if let Some(s) = &self.summary {
            results.insert("summary".into(), s.clone());
        }
        let doc = json!({
            "config": config,
            "results": results,
            "failures": self.failures,
            "timing": timing.map(|t| json!({ "seconds": t })),
        });
        let mut s = serde_json::to_string_pretty(&doc).unwrap_or_default();
        s.push('\n');
        s
    }
}

fn report_row(r: &ResidualReport) -> Vec<Cell> {
    vec![
        r.check.clone().into(),
        r.max_residual.into(),
        r.worst_at.into(),
        r.tolerance.into(),
        r.points.into(),
        r.passed.into(),
    ]
}

fn residual_outcome(reports: &[ResidualReport]) -> Outcome {
    let mut out = Outcome::new(&["check", "max_residual", "worst_at", "tolerance", "points", "passed"]);
    for r in reports {
        out.push(report_row(r));
        if !r.passed {
            out.failures.push(serde_json::to_value(r).unwrap_or(Value::Null));
        }
    }
    out
}

fn linear_grid(a: f64, b: f64, k: usize) -> Vec<f64> {
    (0..k).map(|i| a + (b - a) * i as f64 / (k - 1) as f64).collect()
}

fn log_grid(a: f64, b: f64, k: usize) -> Vec<f64> {
    (0..k).map(|i| a * (b / a).powf(i as f64 / (k - 1) as f64)).collect()
}

fn cmd_phi(cfg: &RunConfig, grid: &[f64]) -> Result<Outcome, Error> {
    if cfg.n < 2 {
        return Err(Error::InvalidParameter("phi needs n >= 2".into()));
    }
    let tol = 1e-10;
    let mut out = Outcome::new(&["r", "value", "oracle", "diff", "tolerance", "passed"]);
    for &r in grid {
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::InvalidParameter(format!("radius {r} outside [0, 1]")));
        }
        let v = phi_with(cfg.n, r, cfg.numerics.series())?;
        let oracle = phi_closed_form(cfg.n, r);
        let diff = oracle.map(|o| (v - o).abs());
        let passed = diff.map_or(true, |d| d <= tol * oracle.unwrap().abs().max(f64::MIN_POSITIVE) || d == 0.0);
        if !passed {
            out.failures.push(json!({ "r": r, "value": v, "oracle": oracle, "diff": diff }));
        }
        out.push(vec![r.into(), v.into(), oracle.into(), diff.into(), tol.into(), passed.into()]);
    }
    Ok(out)
}

fn weight_params(cfg: &RunConfig) -> Result<WeightParams, Error> {
    if cfg.n < 2 {
        return Err(Error::InvalidParameter("this command needs n >= 2".into()));
    }
    WeightParams::new(cfg.n, cfg.alpha, &cfg.numerics)
}

fn cmd_theta(cfg: &RunConfig, grid: &[f64]) -> Result<Outcome, Error> {
    let params = weight_params(cfg)?;
    let profile = ThetaProfile::new(&params, &cfg.numerics)?;
    let tol = if cfg.n == 2 { 1e-10 } else { 1e-9 };
    let mut out = Outcome::new(&["s", "v", "value", "oracle", "diff", "tolerance", "passed"]);
    for &s in grid {
        if !(s >= 0.0) {
            return Err(Error::InvalidParameter(format!("measure {s} must be nonnegative")));
        }
        let value = profile.theta(s);
        // the interpolated table is checked against closed form or direct quadrature
        let oracle = if cfg.n == 2 { theta_n2(cfg.alpha, s) } else { profile.theta_direct(s)? };
        let diff = (value - oracle).abs();
        let passed = diff <= tol;
        if !passed {
            out.failures.push(json!({ "s": s, "value": value, "oracle": oracle, "diff": diff }));
        }
        out.push(vec![
            s.into(),
            radius_from_volume(cfg.n, s).into(),
            value.into(),
            oracle.into(),
            diff.into(),
            tol.into(),
            passed.into(),
        ]);
    }
    Ok(out)
}

fn cmd_certify(cfg: &RunConfig, which: Certification) -> Result<Outcome, Error> {
    let n = cfg.n;
    if n < 2 {
        return Err(Error::InvalidParameter("certifications need n >= 2".into()));
    }
    let all = which == Certification::All;
    let mut reports = Vec::new();
    let s_grid = log_grid(0.1, 50.0, 60);
    if all || which == Certification::WeightOde {
        reports.push(certify_weight_ode(n, &linear_grid(0.05, 0.9, 100)));
    }
    if all || which == Certification::ThetaOde {
        let params = weight_params(cfg)?;
        let profile = ThetaProfile::new(&params, &cfg.numerics)?;
        reports.push(certify_theta_ode(&profile, &s_grid));
    }
    if all || which == Certification::Merk {
        reports.push(certify_merk(n, &linear_grid(0.05, 0.95, 91)));
    }
    if all || which == Certification::Claim {
        reports.push(certify_claim(n, &s_grid));
    }
    if all || which == Certification::Euler {
        reports.push(certify_euler(&[n], &linear_grid(0.0, 0.9, 91)));
    }
    if all || which == Certification::GammaIdentity {
        reports.push(certify_gamma_identity(0..=20, 3..=12));
    }
    if all || which == Certification::HypDerivative {
        reports.push(certify_hyp_derivative(&[n], &linear_grid(0.05, 0.85, 81)));
    }
    Ok(residual_outcome(&reports))
}

fn cmd_concentrate(cfg: &RunConfig, f: &str, omega: &str) -> Result<Outcome, CommandError> {
    let params = weight_params(cfg)?;
    let f = parse_test_function(f, &params).map_err(CommandError::Usage)?;
    let omega = parse_domain(omega, cfg.n, &cfg.numerics).map_err(CommandError::Usage)?;
    let q = concentration_quotient(&f, &omega, &params, &cfg.numerics)?;
    let profile = ThetaProfile::new(&params, &cfg.numerics)?;
    let m = omega.measure();
    let theta = profile.theta(m.value + 3.0 * m.stderr);
    let passed = q.value.value <= theta + 3.0 * q.value.stderr;
    let mut out = Outcome::new(&[
        "function", "domain", "s", "s_stderr", "value", "stderr", "theta", "method", "passed",
    ]);
    out.push(vec![
        f.to_string().into(),
        format!("{omega:?}").into(),
        m.value.into(),
        m.stderr.into(),
        q.value.value.into(),
        q.value.stderr.into(),
        theta.into(),
        (if q.quadrature { "quadrature" } else { "monte-carlo" }).into(),
        passed.into(),
    ]);
    out.summary = Some(json!({
        "truncation_warning": q.truncation_warning,
        "variance_warning": q.variance_warning,
    }));
    if !passed {
        out.failures.push(json!({ "value": q.value, "theta": theta }));
    }
    Ok(out)
}

fn cmd_fuzz(cfg: &RunConfig, trials: usize, equality_trials: usize) -> Result<Outcome, Error> {
    let params = weight_params(cfg)?;
    let profile = ThetaProfile::new(&params, &cfg.numerics)?;
    let report = fuzz_main_inequality(trials, equality_trials, &profile, &cfg.numerics, cfg.numerics.seed)?;
    let mut out = Outcome::new(&[
        "trial", "kind", "function", "domain", "s", "value", "stderr", "theta", "deficit", "passed",
    ]);
    for t in &report.trials {
        out.push(vec![
            t.index.into(),
            (if t.equality_trial { "equality" } else { "inequality" }).into(),
            t.function.clone().into(),
            t.domain.clone().into(),
            t.s.into(),
            t.quotient.value.into(),
            t.quotient.stderr.into(),
            t.theta.into(),
            t.deficit.into(),
            (!t.violation).into(),
        ]);
        if t.violation {
            out.failures.push(serde_json::to_value(t).unwrap_or(Value::Null));
        }
    }
    out.summary = Some(json!({
        "violations": report.violations,
        "equality_failures": report.equality_failures,
        "equality_max_z": num_json(report.equality_max_z),
        "passed": report.passed,
    }));
    Ok(out)
}

fn cmd_wavelet(cfg: &RunConfig, which: WaveletTask, beta: Option<f64>) -> Result<Outcome, Error> {
    let n = cfg.n;
    match which {
        WaveletTask::Witness => {
            let mut out = Outcome::new(&[
                "n", "y1", "t", "u", "laplacian", "fd_error", "laplacian_closed", "equivalence", "passed",
            ]);
            match find_negativity_witness(n, &WitnessGrid::default()) {
                Ok(w) => {
                    let passed = w.laplacian < 0.0 && w.equivalence < 0.0;
                    out.push(vec![
                        w.n.into(),
                        w.y1.into(),
                        w.t.into(),
                        w.u.into(),
                        w.laplacian.into(),
                        w.fd_error.into(),
                        w.laplacian_closed.into(),
                        w.equivalence.into(),
                        passed.into(),
                    ]);
                    if !passed {
                        out.failures.push(serde_json::to_value(w).unwrap_or(Value::Null));
                    }
                }
                Err(e @ Error::NoWitnessFound { .. }) if n == 1 => {
                    out.summary = Some(json!({ "control": "no witness for n = 1", "detail": e.to_string() }));
                }
                Err(e) => return Err(e),
            }
            Ok(out)
        }
        WaveletTask::Ode => {
            let spec = WindowSpec::new(n, beta.unwrap_or(n as f64 / 2.0 + 0.5))?;
            let tol = 1e-8;
            let mut out = Outcome::new(&["r", "window", "residual", "scale", "relative", "tolerance", "passed"]);
            for r in linear_grid(0.1, 8.0, 80) {
                for (kind, name) in [(WindowKind::K, "K"), (WindowKind::I, "I")] {
                    let res = ode_residual(&spec, kind, r)?;
                    let passed = res.relative() < tol;
                    if !passed {
                        out.failures.push(json!({ "r": r, "window": name, "relative": res.relative() }));
                    }
                    out.push(vec![
                        r.into(),
                        name.into(),
                        res.residual.into(),
                        res.scale.into(),
                        res.relative().into(),
                        tol.into(),
                        passed.into(),
                    ]);
                }
            }
            out.summary = Some(json!({ "window": spec, "admissible": spec.is_admissible() }));
            Ok(out)
        }
        WaveletTask::Limits => {
            if n < 2 {
                return Err(Error::InvalidParameter("limits need n >= 2".into()));
            }
            let tol = 5e-2;
            let mut out = Outcome::new(&["quantity", "y1", "value", "oracle", "diff", "tolerance", "passed"]);
            for y1 in [0.5, 1.0, 2.0] {
                let l = boundary_limits(n, y1, 1e-3)?;
                let curvature_name = if n == 2 { "d_tt_minus_d_t_over_t" } else { "d_tt" };
                let rows = [
                    ("d_yy", l.d_yy, l.d_yy_limit, tol * l.d_yy_limit.abs()),
                    (curvature_name, l.curvature, l.curvature_limit, tol * l.curvature_limit.abs()),
                    // ∂_t u → 0 only like t log(1/t) when n = 2; measure it against the other terms
                    ("d_t", l.d_t, 0.0, tol * l.d_yy_limit.abs().max(l.curvature_limit.abs())),
                ];
                for (name, value, oracle, bound) in rows {
                    let diff = (value - oracle).abs();
                    let passed = diff < bound;
                    if !passed {
                        out.failures.push(json!({ "quantity": name, "y1": y1, "value": value, "oracle": oracle }));
                    }
                    out.push(vec![
                        name.into(),
                        y1.into(),
                        value.into(),
                        oracle.into(),
                        diff.into(),
                        tol.into(),
                        passed.into(),
                    ]);
                }
            }
            let y_max = limit_positive_range(n)?;
            let probe = 0.5 * y_max.min(1.0);
            let expr = limit_expression(n, probe)?;
            if !(expr > 0.0) {
                out.failures.push(json!({ "limit_expression": expr, "y1": probe }));
            }
            out.summary = Some(json!({ "y1_max": y_max, "limit_expression_at": probe, "limit_expression": expr }));
            Ok(out)
        }
    }
}

enum CommandError {
    Usage(String),
    Failed(Error),
}

impl From<Error> for CommandError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(m) => CommandError::Usage(m),
            other => CommandError::Failed(other),
        }
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Phi { .. } => "phi",
        Command::Theta { .. } => "theta",
        Command::Certify { .. } => "certify",
        Command::Concentrate { .. } => "concentrate",
        Command::Fuzz { .. } => "fuzz",
        Command::Wavelet { .. } => "wavelet",
    }
}

/// Runs the command line `args` and returns the process exit code. Tables go
/// to `stdout` or the output file; diagnostics go to `stderr`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { write!(stdout, "{text}") } else { write!(stderr, "{text}") };
            return code;
        }
    };
    let cfg = match resolve(&cli.common, command_name(&cli.command)) {
        Ok(c) => c,
        Err(UsageError(m)) => {
            let _ = writeln!(stderr, "error: {m}");
            return 2;
        }
    };
    let start = Instant::now();
    let result: Result<Outcome, CommandError> = match &cli.command {
        Command::Phi { grid } => parse_grid(grid)
            .map_err(CommandError::Usage)
            .and_then(|g| cmd_phi(&cfg, &g).map_err(Into::into)),
        Command::Theta { grid } => parse_grid(grid)
            .map_err(CommandError::Usage)
            .and_then(|g| cmd_theta(&cfg, &g).map_err(Into::into)),
        Command::Certify { which } => cmd_certify(&cfg, *which).map_err(Into::into),
        Command::Concentrate { f, omega } => cmd_concentrate(&cfg, f, omega),
        Command::Fuzz { trials, equality_trials } => cmd_fuzz(&cfg, *trials, *equality_trials).map_err(Into::into),
        Command::Wavelet { which, beta } => cmd_wavelet(&cfg, *which, *beta).map_err(Into::into),
    };
    let outcome = match result {
        Ok(o) => o,
        Err(CommandError::Usage(m)) => {
            let _ = writeln!(stderr, "error: {m}");
            return 2;
        }
        Err(CommandError::Failed(e)) => {
            let doc = json!({ "config": cfg, "results": Value::Null, "failures": [e.to_string()], "timing": Value::Null });
            let _ = writeln!(stderr, "{}", serde_json::to_string_pretty(&doc).unwrap_or_default());
            return 1;
        }
    };
    let timing = cfg.timing.then(|| start.elapsed().as_secs_f64());
    let text = if cfg.format == "csv" { outcome.csv() } else { outcome.json(&cfg, timing) };
    let written = match &cfg.out {
        Some(path) => {
            let res = path
                .parent()
                .filter(|p| !p.as_os_str().is_empty())
                .map_or(Ok(()), std::fs::create_dir_all)
                .and_then(|_| std::fs::write(path, &text));
            res.map_err(|e| format!("cannot write {}: {e}", path.display()))
        }
        None => stdout.write_all(text.as_bytes()).map_err(|e| e.to_string()),
    };
    if let Err(m) = written {
        let _ = writeln!(stderr, "error: {m}");
        return 2;
    }
    if outcome.failures.is_empty() {
        0
    } else {
        let _ = writeln!(stderr, "{} check(s) failed", outcome.failures.len());
        1
    }
}
