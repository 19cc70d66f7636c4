//! Run configuration: command-line flags layered over an optional flat
//! `key = value` file, then defaults.

use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64 as C;
use serde::Serialize;
use wavespec::model::ModelFunctions;

/// Default output directory when neither a flag, the file nor `WAVESPEC_OUT` sets one.
pub const DEFAULT_OUT: &str = "wavespec-out";
pub const OUT_ENV: &str = "WAVESPEC_OUT";
pub const SINGULAR_BRACKET: (f64, f64) = (0.19, 0.23);
pub const FULL_BRACKET: (f64, f64) = (0.17, 0.25);

#[derive(Parser, Debug)]
#[command(
    name = "wavespec",
    version,
    about = "Shock-fronted travelling waves: construction, essential spectrum, Evans function"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Args, Debug, Default)]
pub struct CommonArgs {
    /// Flat `key = value` file; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory [default: $WAVESPEC_OUT, else ./wavespec-out].
    #[arg(long, short = 'o', global = true)]
    pub output_dir: Option<PathBuf>,
    /// Relative integration tolerance [default: 1e-10].
    #[arg(long, global = true)]
    pub rtol: Option<f64>,
    /// Absolute integration tolerance [default: 1e-12].
    #[arg(long, global = true)]
    pub atol: Option<f64>,
    /// Shooting tolerance: matching defect (ε = 0) and speed bracket width (ε > 0) [default: 1e-12].
    #[arg(long, global = true)]
    pub shoot_tol: Option<f64>,
    /// Wavespeed bracket `LO,HI` [default: 0.19,0.23 singular; 0.17,0.25 full].
    #[arg(long, global = true, value_parser = parse_pair)]
    pub c_bracket: Option<(f64, f64)>,
    /// Lower boundary of Ω, in (R'(0), 0) [default: -0.95].
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    /// Section U = Σ for the Evans function, in (u_J, 1) [default: 0.95].
    #[arg(long, global = true)]
    pub section: Option<f64>,
}

#[derive(Subcommand, Debug)]
pub enum Cmd {
    /// Singular orbit (default) or the full wave for ε > 0.
    Wave(WaveArgs),
    /// Essential-spectrum borders and sectoriality.
    Espec(EspecArgs),
    /// Evans function at a point, winding on a circle, or a real-axis scan.
    Evans(EvansArgs),
    /// Convergence of the full linearized flow to the reduced one as ε → 0.
    Converge(ConvergeArgs),
    /// Run the invariant suites and print a pass/fail table.
    Verify,
}

#[derive(Args, Debug, Default)]
pub struct WaveArgs {
    /// ε = 0 orbit: slow segments joined by the fast jump.
    #[arg(long, conflicts_with = "full")]
    pub singular: bool,
    /// Full wave for ε > 0.
    #[arg(long)]
    pub full: bool,
    /// Relaxation parameter, in (0, 0.01] [default: 1e-3].
    #[arg(long, requires = "full", allow_negative_numbers = true)]
    pub eps: Option<f64>,
}

#[derive(Args, Debug, Default)]
pub struct EspecArgs {
    /// Relaxation parameter [default: 0.1].
    #[arg(long, allow_negative_numbers = true)]
    pub eps: Option<f64>,
    /// Order of the dispersion relation, 3 or 4 [default: 3].
    #[arg(long)]
    pub order: Option<u8>,
    /// Fourth-order coefficient [default: 1].
    #[arg(long, allow_negative_numbers = true)]
    pub a: Option<f64>,
    /// Wavenumbers sampled on [-K, K] [default: 100].
    #[arg(long)]
    pub k_max: Option<f64>,
    /// Samples per border [default: 2001].
    #[arg(long)]
    pub samples: Option<usize>,
}

#[derive(Args, Debug, Default)]
pub struct EvansArgs {
    /// Single evaluation at `X+Yi`.
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true,
          conflicts_with_all = ["contour_center", "contour_radius", "n", "scan"])]
    pub lambda: Option<C>,
    /// Circle centre [default: 0].
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true, conflicts_with = "scan")]
    pub contour_center: Option<C>,
    /// Circle radius [default: 0.03].
    #[arg(long, conflicts_with = "scan")]
    pub contour_radius: Option<f64>,
    /// Initial contour samples, at least 16 [default: 32].
    #[arg(long, conflicts_with = "scan")]
    pub n: Option<usize>,
    /// Real-axis scan for eigenvalues and poles on [A, B].
    #[arg(long, num_args = 2, value_names = ["A", "B"], allow_negative_numbers = true)]
    pub scan: Option<Vec<f64>>,
}

#[derive(Args, Debug, Default)]
pub struct ConvergeArgs {
    /// Spectral parameter `X+Yi` [default: 15].
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    pub lambda: Option<C>,
    /// Strictly descending ε values, comma separated [default: 1e-2,3e-3,1e-3].
    #[arg(long, value_delimiter = ',')]
    pub eps_list: Option<Vec<f64>>,
    /// Wavespeed used for each ε [default: frozen].
    #[arg(long, value_enum)]
    pub speed: Option<Speed>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Speed {
    /// `c = c₀` for every ε.
    Frozen,
    /// `c = c(ε)` by shooting.
    Computed,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum EvansMode {
    Point { lambda: C },
    Contour { center: C, radius: f64, n: usize },
    Scan { a: f64, b: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "name", rename_all = "lowercase")]
pub enum Command {
    Wave { full: bool, eps: f64 },
    Espec { eps: f64, order: u8, a: f64, k_max: f64, samples: usize },
    Evans(EvansMode),
    Converge { lambda: C, eps_list: Vec<f64>, speed: Speed },
    Verify,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub rtol: f64,
    pub atol: f64,
    pub shoot_tol: f64,
    pub c_bracket: (f64, f64),
    pub beta: f64,
    pub section: f64,
    pub output_dir: PathBuf,
}

/// Every setting that may come from a flag or the file.
#[derive(Clone, Debug, Default, PartialEq)]
struct Layer {
    output_dir: Option<PathBuf>,
    rtol: Option<f64>,
    atol: Option<f64>,
    shoot_tol: Option<f64>,
    c_bracket: Option<(f64, f64)>,
    beta: Option<f64>,
    section: Option<f64>,
    eps: Option<f64>,
    order: Option<u8>,
    a: Option<f64>,
    k_max: Option<f64>,
    samples: Option<usize>,
    lambda: Option<C>,
    center: Option<C>,
    radius: Option<f64>,
    n: Option<usize>,
    scan: Option<(f64, f64)>,
    eps_list: Option<Vec<f64>>,
    speed: Option<Speed>,
}

/// Keys accepted in the config file.
pub const FILE_KEYS: &[&str] = &[
    "output_dir",
    "rtol",
    "atol",
    "shoot_tol",
    "c_bracket",
    "beta",
    "section",
    "eps",
    "order",
    "a",
    "k_max",
    "samples",
    "lambda",
    "center",
    "radius",
    "n",
    "scan",
    "eps_list",
    "speed",
];

macro_rules! overlay {
    ($hi:expr, $lo:expr; $($f:ident),*) => {
        Layer { $($f: $hi.$f.or($lo.$f)),* }
    };
}

impl Layer {
    fn over(self, lo: Layer) -> Layer {
        overlay!(self, lo; output_dir, rtol, atol, shoot_tol, c_bracket, beta, section, eps, order, a, k_max,
                 samples, lambda, center, radius, n, scan, eps_list, speed)
    }

    fn has_evans_mode(&self) -> bool {
        self.lambda.is_some()
            || self.scan.is_some()
            || self.center.is_some()
            || self.radius.is_some()
            || self.n.is_some()
    }

    fn from_cli(cli: &Cli) -> Layer {
        let c = &cli.common;
        let mut l = Layer {
            output_dir: c.output_dir.clone(),
            rtol: c.rtol,
            atol: c.atol,
            shoot_tol: c.shoot_tol,
            c_bracket: c.c_bracket,
            beta: c.beta,
            section: c.section,
            ..Layer::default()
        };
        match &cli.command {
            Cmd::Wave(w) => l.eps = w.eps,
            Cmd::Espec(e) => {
                l.eps = e.eps;
                l.order = e.order;
                l.a = e.a;
                l.k_max = e.k_max;
                l.samples = e.samples;
            }
            Cmd::Evans(e) => {
                l.lambda = e.lambda;
                l.center = e.contour_center;
                l.radius = e.contour_radius;
                l.n = e.n;
                l.scan = e.scan.as_ref().map(|v| (v[0], v[1]));
            }
            Cmd::Converge(c) => {
                l.lambda = c.lambda;
                l.eps_list = c.eps_list.clone();
                l.speed = c.speed;
            }
            Cmd::Verify => {}
        }
        l
    }

    fn from_file(text: &str) -> Result<Layer, String> {
        let mut l = Layer::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| format!("config line {}: expected `key = value`", i + 1))?;
            let bad = |e: String| format!("config line {}: {key}: {e}", i + 1);
            match key {
                "output_dir" => l.output_dir = Some(PathBuf::from(value)),
                "rtol" => l.rtol = Some(parse_num(value).map_err(bad)?),
                "atol" => l.atol = Some(parse_num(value).map_err(bad)?),
                "shoot_tol" => l.shoot_tol = Some(parse_num(value).map_err(bad)?),
                "c_bracket" => l.c_bracket = Some(parse_pair(value).map_err(bad)?),
                "beta" => l.beta = Some(parse_num(value).map_err(bad)?),
                "section" => l.section = Some(parse_num(value).map_err(bad)?),
                "eps" => l.eps = Some(parse_num(value).map_err(bad)?),
                "order" => l.order = Some(parse_num(value).map_err(bad)?),
                "a" => l.a = Some(parse_num(value).map_err(bad)?),
                "k_max" => l.k_max = Some(parse_num(value).map_err(bad)?),
                "samples" => l.samples = Some(parse_num(value).map_err(bad)?),
                "lambda" => l.lambda = Some(parse_complex(value).map_err(bad)?),
                "center" => l.center = Some(parse_complex(value).map_err(bad)?),
                "radius" => l.radius = Some(parse_num(value).map_err(bad)?),
                "n" => l.n = Some(parse_num(value).map_err(bad)?),
                "scan" => l.scan = Some(parse_pair(value).map_err(bad)?),
                "eps_list" => l.eps_list = Some(parse_list(value).map_err(bad)?),
                "speed" => l.speed = Some(Speed::from_str(value, true).map_err(bad)?),
                _ => {
                    return Err(format!("config line {}: unknown key `{key}` (known: {})", i + 1, FILE_KEYS.join(", ")))
                }
            }
        }
        Ok(l)
    }
}

fn parse_num<T: FromStr>(s: &str) -> Result<T, String> {
    s.trim().parse().map_err(|_| format!("malformed value `{s}`"))
}

/// `X+Yi`, `X`, `Yi`; whitespace is ignored.
pub fn parse_complex(s: &str) -> Result<C, String> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    C::from_str(&t).map_err(|_| format!("malformed complex number `{s}` (expected X+Yi)"))
}

/// `LO,HI`.
pub fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    match parse_list(s)?.as_slice() {
        &[a, b] => Ok((a, b)),
        _ => Err(format!("expected two comma-separated numbers, got `{s}`")),
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').map(parse_num).collect()
}

fn positive(name: &str, x: f64) -> Result<f64, String> {
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err(format!("{name} must be positive and finite, got {x}"))
    }
}

/// Parses `argv` (including the program name), reads the `--config` file if
/// given, and resolves a validated configuration. `env_out` stands in for
/// `WAVESPEC_OUT`. Errors are usage errors.
pub fn parse_config<I, S>(argv: I, env_out: Option<PathBuf>) -> Result<RunConfig, UsageError>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(UsageError::Clap)?;
    let file = match &cli.common.config {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| UsageError::Invalid(format!("config file {}: {e}", p.display())))?;
            Layer::from_file(&text).map_err(UsageError::Invalid)?
        }
        None => Layer::default(),
    };
    resolve(&cli, file, env_out).map_err(UsageError::Invalid)
}

#[derive(Debug)]
pub enum UsageError {
    Clap(clap::Error),
    Invalid(String),
}

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            UsageError::Clap(e) => write!(f, "{e}"),
            UsageError::Invalid(m) => write!(f, "error: {m}"),
        }
    }
}

fn resolve(cli: &Cli, file: Layer, env_out: Option<PathBuf>) -> Result<RunConfig, String> {
    let flags = Layer::from_cli(cli);
    // The evans mode is decided by whichever layer names one, flags first.
    let evans_source_is_file = !flags.has_evans_mode() && file.has_evans_mode();
    let file_mode = (file.lambda.is_some(), file.scan.is_some());
    let l = flags.over(file);
    let model = ModelFunctions::standard();

    let full = matches!(&cli.command, Cmd::Wave(w) if w.full);
    let command = match &cli.command {
        Cmd::Wave(_) => {
            let eps = if full { l.eps.unwrap_or(1e-3) } else { 0.0 };
            if full && !(eps > 0.0 && eps <= 0.01) {
                return Err(format!("wave --full needs 0 < eps <= 0.01, got {eps}"));
            }
            Command::Wave { full, eps }
        }
        Cmd::Espec(_) => {
            let eps = l.eps.unwrap_or(0.1);
            if !(eps.is_finite() && eps >= 0.0) {
                return Err(format!("eps must be non-negative, got {eps}"));
            }
            let order = l.order.unwrap_or(3);
            if order != 3 && order != 4 {
                return Err(format!("order must be 3 or 4, got {order}"));
            }
            let a = l.a.unwrap_or(1.0);
            if !a.is_finite() {
                return Err("a must be finite".into());
            }
            let samples = l.samples.unwrap_or(2001);
            if samples < 2 {
                return Err(format!("samples must be at least 2, got {samples}"));
            }
            Command::Espec { eps, order, a, k_max: positive("k_max", l.k_max.unwrap_or(100.0))?, samples }
        }
        Cmd::Evans(e) => {
            let (lam, scan) = if evans_source_is_file { file_mode } else { (e.lambda.is_some(), e.scan.is_some()) };
            let mode = if lam {
                EvansMode::Point { lambda: l.lambda.expect("lambda set") }
            } else if scan {
                let (a, b) = l.scan.expect("scan set");
                if !(a.is_finite() && b.is_finite() && a < b) {
                    return Err(format!("scan needs A < B, got [{a}, {b}]"));
                }
                EvansMode::Scan { a, b }
            } else {
                let n = l.n.unwrap_or(32);
                if n < 16 {
                    return Err(format!("contour n must be at least 16, got {n}"));
                }
                EvansMode::Contour {
                    center: l.center.unwrap_or_default(),
                    radius: positive("contour radius", l.radius.unwrap_or(0.03))?,
                    n,
                }
            };
            Command::Evans(mode)
        }
        Cmd::Converge(_) => {
            let eps_list = l.eps_list.clone().unwrap_or_else(|| vec![1e-2, 3e-3, 1e-3]);
            if eps_list.is_empty() || eps_list.iter().any(|&e| !(e > 0.0 && e <= 0.01)) {
                return Err(format!("eps list entries must lie in (0, 0.01], got {eps_list:?}"));
            }
            if eps_list.windows(2).any(|w| w[1] >= w[0]) {
                return Err(format!("eps list must be strictly descending, got {eps_list:?}"));
            }
            Command::Converge {
                lambda: l.lambda.unwrap_or(C::new(15.0, 0.0)),
                eps_list,
                speed: l.speed.unwrap_or(Speed::Frozen),
            }
        }
        Cmd::Verify => Command::Verify,
    };

    let c_bracket = l.c_bracket.unwrap_or(if full { FULL_BRACKET } else { SINGULAR_BRACKET });
    if !(c_bracket.0 > 0.0 && c_bracket.1 > c_bracket.0 && c_bracket.1.is_finite()) {
        return Err(format!("c bracket must satisfy 0 < lo < hi, got {c_bracket:?}"));
    }
    let beta = l.beta.unwrap_or(-0.95);
    let rp0 = model.r_prime(0.0);
    if !(beta > rp0 && beta < 0.0) {
        return Err(format!("beta must lie in (R'(0), 0) = ({rp0}, 0), got {beta}"));
    }
    let section = l.section.unwrap_or(0.95);
    if !(section > model.u_j() && section < 1.0) {
        return Err(format!("section must lie in ({}, 1), got {section}", model.u_j()));
    }
    Ok(RunConfig {
        command,
        rtol: positive("rtol", l.rtol.unwrap_or(1e-10))?,
        atol: positive("atol", l.atol.unwrap_or(1e-12))?,
        shoot_tol: positive("shoot_tol", l.shoot_tol.unwrap_or(1e-12))?,
        c_bracket,
        beta,
        section,
        output_dir: l.output_dir.or(env_out).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
    })
}
