//! Command-line front end.
//!
//! Every subcommand reads its parameters from flags and, optionally, a flat
//! TOML file given with `--config`; flags win over file values. Results go to
//! stdout as `key = value` lines and, with `--out`, to CSV files.
//!
//! `--out` naming: a path ending in `.csv` receives the main table and
//! sidecars are written next to it as `<stem>_summary.txt` and
//! `<stem>_<name>.csv`; any other path is treated as a directory holding
//! `<subcommand>.csv`, `<subcommand>_summary.txt` and
//! `<subcommand>_<name>.csv`.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid input, 3 numerical failure.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::counterexample::{self as cx, CounterexampleSpec};
use crate::error::{Error, Result};
use crate::frac_core::{caputo_weights, fmt_f64, power_rule_constant, FractionalOrder, SampledPath, TimeGrid};
use crate::frac_ode::{decay_envelope, exact_k1, solve_fode, FodeProblem};
use crate::hj_evolve::{self as hj, EikonalProblem, EvolveOptions, TorusGrid};
use crate::special_fn::{gamma_fn, inverse_beta_half, mittag_leffler, pi_csc, reg_incomplete_beta, MittagLefflerParams};

/// Named columns of reals.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Self {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        let columns = vec![Vec::new(); names.len()];
        Table { names, columns }
    }

    pub fn push_row(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.names.len(), "row width does not match the header");
        for (c, &v) in self.columns.iter_mut().zip(row) {
            c.push(v);
        }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names.iter().position(|n| n == name).map(|k| self.columns[k].as_slice())
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.names.join(",");
        s.push('\n');
        for r in 0..self.rows() {
            for (k, c) in self.columns.iter().enumerate() {
                if k > 0 {
                    s.push(',');
                }
                s.push_str(&fmt_f64(c[r]));
            }
            s.push('\n');
        }
        s
    }
}

/// Writes `table` as CSV: header row, then one line per row with 17
/// significant digits.
pub fn emit_csv(table: &Table, path: &Path) -> Result<()> {
    fs::write(path, table.to_csv()).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Ordered `key = value` lines.
#[derive(Debug, Clone, Default)]
pub struct Summary(Vec<(String, String)>);

impl Summary {
    fn num(&mut self, key: &str, v: f64) {
        self.0.push((key.to_string(), fmt_f64(v)));
    }

    fn int(&mut self, key: &str, v: usize) {
        self.0.push((key.to_string(), v.to_string()));
    }

    fn text(&mut self, key: &str, v: impl Into<String>) {
        self.0.push((key.to_string(), v.into()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.0 {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}

/// Everything a subcommand produces.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub table: Table,
    pub summary: Summary,
    pub sidecars: Vec<(String, Table)>,
}

#[derive(Debug, Parser)]
#[command(name = "caputo-hj", version, about = "Time-fractional Hamilton-Jacobi laboratory")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct Common {
    /// Flat TOML file with parameter values; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output CSV path or directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Accepted for interface stability; nothing here is random.
    #[arg(long)]
    pub seed: Option<u64>,
}

macro_rules! params {
    ($(#[$smeta:meta])* $name:ident { $( $(#[$meta:meta])* $field:ident : $ty:ty ),* $(,)? }) => {
        $(#[$smeta])*
        #[derive(Debug, Clone, Default, Args, Deserialize)]
        #[command(rename_all = "snake_case")]
        #[serde(deny_unknown_fields)]
        pub struct $name {
            $( $(#[$meta])* pub $field: Option<$ty>, )*
            /// Output path; only read from config files.
            #[arg(skip)]
            pub out: Option<PathBuf>,
        }

        impl $name {
            fn overlay(mut self, file: Self) -> Self {
                $( if self.$field.is_none() { self.$field = file.$field; } )*
                if self.out.is_none() { self.out = file.out; }
                self
            }
        }
    };
}

params!(
    /// Discrete Caputo derivative of `t^β` against the power rule.
    CaputoParams {
        #[arg(long)] alpha: f64,
        #[arg(long)] beta: f64,
        #[arg(long = "T")] #[serde(rename = "T")] t: f64,
        #[arg(long = "M")] #[serde(rename = "M")] steps: usize,
        #[arg(long)] grid: String,
        #[arg(long)] grading: f64,
    }
);

params!(
    /// Mittag-Leffler values and bounds at log-spaced points.
    MlfParams {
        #[arg(long)] alpha: f64,
        #[arg(long)] t_min: f64,
        #[arg(long)] t_max: f64,
        #[arg(long)] points: usize,
        #[arg(long)] radius: f64,
    }
);

params!(
    /// Normalized incomplete beta mass, its median and the gap constant.
    BetaParams {
        #[arg(long)] alpha: f64,
        #[arg(long)] z0: f64,
        #[arg(long)] z1: f64,
    }
);

params!(
    /// Oscillating solution with nonnegative Caputo derivative.
    CounterexampleParams {
        #[arg(long)] alpha: f64,
        #[arg(long = "K_max")] #[serde(rename = "K_max")] k_max: usize,
        #[arg(long)] rel_step: f64,
        #[arg(long)] grading: f64,
        #[arg(long)] allow_extreme: bool,
    }
);

params!(
    /// Fractional relaxation `∂^α E = −A E^k`.
    FodeParams {
        #[arg(long)] alpha: f64,
        #[arg(long = "A")] #[serde(rename = "A")] rate: f64,
        #[arg(long)] k: f64,
        #[arg(long = "T")] #[serde(rename = "T")] t: f64,
        #[arg(long = "M")] #[serde(rename = "M")] steps: usize,
        #[arg(long)] grid: String,
        #[arg(long)] grading: f64,
        #[arg(long)] switch: f64,
        #[arg(long)] epsilon: f64,
    }
);

params!(
    /// Hamilton-Jacobi evolution on the torus.
    HjParams {
        #[arg(long)] alpha: f64,
        #[arg(long)] m: f64,
        #[arg(long)] n: usize,
        #[arg(long)] dim: usize,
        #[arg(long = "T")] #[serde(rename = "T")] t: f64,
        #[arg(long = "M")] #[serde(rename = "M")] steps: usize,
        #[arg(long)] grid: String,
        #[arg(long)] grading: f64,
        #[arg(long)] a: String,
        #[arg(long)] f: String,
        #[arg(long)] g: String,
        #[arg(long)] lip_g: f64,
        #[arg(long, value_delimiter = ',')] snapshots: Vec<f64>,
        #[arg(long)] ell_gamma: f64,
        #[arg(long)] tol: f64,
    }
);

params!(
    /// Decay rate of the box-counting bound.
    RateParams {
        #[arg(long = "D")] #[serde(rename = "D")] d: f64,
        #[arg(long)] alpha: f64,
        #[arg(long)] t: f64,
    }
);

#[derive(Debug, Args)]
pub struct Invocation<P: Args> {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub params: P,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Discrete Caputo derivative of a power against its closed form.
    #[command(allow_negative_numbers = true)]
    Caputo(Invocation<CaputoParams>),
    /// Mittag-Leffler function and its algebraic bounds.
    #[command(allow_negative_numbers = true)]
    Mlf(Invocation<MlfParams>),
    /// Normalized incomplete beta function.
    #[command(allow_negative_numbers = true)]
    Beta(Invocation<BetaParams>),
    /// Bounded oscillating solution with nonnegative Caputo derivative.
    #[command(allow_negative_numbers = true)]
    Counterexample(Invocation<CounterexampleParams>),
    /// Scalar fractional relaxation equation.
    #[command(allow_negative_numbers = true)]
    Fode(Invocation<FodeParams>),
    /// Time-fractional Hamilton-Jacobi evolution.
    #[command(allow_negative_numbers = true)]
    Hj(Invocation<HjParams>),
    /// Rate formula for fractal Aubry sets.
    #[command(allow_negative_numbers = true)]
    Rate(Invocation<RateParams>),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Caputo(_) => "caputo",
            Command::Mlf(_) => "mlf",
            Command::Beta(_) => "beta",
            Command::Counterexample(_) => "counterexample",
            Command::Fode(_) => "fode",
            Command::Hj(_) => "hj",
            Command::Rate(_) => "rate",
        }
    }
}

fn load<P: DeserializeOwned + Default>(path: Option<&Path>) -> Result<P> {
    match path {
        None => Ok(P::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
            toml::from_str(&text).map_err(|e| Error::param("config", format!("{}: {e}", p.display())))
        }
    }
}

fn resolve<P>(inv: &Invocation<P>, overlay: impl Fn(P, P) -> P) -> Result<(P, Option<PathBuf>)>
where
    P: Args + Clone + DeserializeOwned + Default,
{
    let file: P = load(inv.common.config.as_deref())?;
    let merged = overlay(inv.params.clone(), file);
    Ok((merged, inv.common.out.clone()))
}

fn required<T>(v: Option<T>, name: &'static str) -> Result<T> {
    v.ok_or_else(|| Error::param(name, "is required"))
}

fn order(v: Option<f64>) -> Result<FractionalOrder> {
    FractionalOrder::new(required(v, "alpha")?)
}

/// Builds a time grid from its name: `uniform`, `graded` (exponent
/// `grading`, default `(2−α)/α`) or `graded_log` (graded on `[0, switch]`
/// with a quarter of the steps, log-spaced after).
pub fn build_time_grid(
    kind: &str,
    horizon: f64,
    steps: usize,
    alpha: FractionalOrder,
    grading: Option<f64>,
    switch: Option<f64>,
) -> Result<TimeGrid> {
    let exponent = grading.unwrap_or_else(|| crate::frac_core::default_grading(alpha));
    match kind {
        "uniform" => TimeGrid::uniform(horizon, steps),
        "graded" => TimeGrid::graded(horizon, steps, exponent),
        "graded_log" => {
            let graded = (steps / 4).max(1);
            TimeGrid::graded_log(horizon, switch.unwrap_or(1.0), graded, steps - graded, exponent)
        }
        other => Err(Error::param("grid", format!("unknown grid `{other}` (uniform, graded, graded_log)"))),
    }
}

pub fn run_caputo(p: &CaputoParams) -> Result<Report> {
    let alpha = order(p.alpha)?;
    let beta = required(p.beta, "beta")?;
    let horizon = p.t.unwrap_or(1.0);
    let steps = p.steps.unwrap_or(1024);
    let kind = p.grid.as_deref().unwrap_or("uniform");
    let grid = build_time_grid(kind, horizon, steps, alpha, p.grading, None)?;
    let konst = power_rule_constant(alpha, beta)?;
    let path = SampledPath::from_fn(grid.clone(), |t| t.powf(beta));
    let d = caputo_weights(alpha, &grid)?.apply_all(&path)?;
    let mut table = Table::new(["t", "discrete", "exact", "rel_err"]);
    let mut worst: f64 = 0.0;
    for (k, &v) in d.iter().enumerate() {
        let t = grid.nodes()[k + 1];
        let exact = konst * t.powf(beta - alpha.value());
        let rel = ((v - exact) / exact).abs();
        worst = worst.max(rel);
        table.push_row(&[t, v, exact, rel]);
    }
    let mut s = Summary::default();
    s.num("alpha", alpha.value());
    s.num("beta", beta);
    s.int("M", steps);
    s.text("grid", kind);
    s.num("max_rel_err", worst);
    s.num("rel_err_at_T", *table.column("rel_err").unwrap().last().unwrap());
    Ok(Report { table, summary: s, sidecars: vec![] })
}

pub fn run_mlf(p: &MlfParams) -> Result<Report> {
    let alpha = order(p.alpha)?;
    let (t_min, t_max) = (p.t_min.unwrap_or(1.0), p.t_max.unwrap_or(1e4));
    let points = p.points.unwrap_or(50);
    if !(t_min > 0.0 && t_max > t_min) {
        return Err(Error::param("t_max", format!("need 0 < t_min < t_max, got {t_min}, {t_max}")));
    }
    if points < 2 {
        return Err(Error::param("points", format!("must be at least 2, got {points}")));
    }
    let params = match p.radius {
        Some(r) => MittagLefflerParams::with_radius(alpha, r, MittagLefflerParams::DEFAULT_TOL)?,
        None => MittagLefflerParams::new(alpha),
    };
    let a = alpha.value();
    let (g1ma, g1pa) = (gamma_fn(1.0 - a)?, gamma_fn(1.0 + a)?);
    let mut table = Table::new(["t", "E", "lower", "upper", "sharp_lower", "sharp_upper"]);
    let (mut low_v, mut up_v, mut sharp_v) = (0, 0, 0);
    for k in 0..points {
        let t = t_min * (t_max / t_min).powf(k as f64 / (points - 1) as f64);
        let e = mittag_leffler(&params, -t)?;
        let (lo, up) = (1.0 / (g1ma * t), g1pa / t);
        let (slo, sup) = (1.0 / (1.0 + g1ma * t), 1.0 / (1.0 + t / g1pa));
        low_v += usize::from(e < lo);
        up_v += usize::from(e > up);
        sharp_v += usize::from(e < slo || e > sup);
        table.push_row(&[t, e, lo, up, slo, sup]);
    }
    let mut s = Summary::default();
    s.num("alpha", a);
    s.int("points", points);
    s.int("lower_violations", low_v);
    s.int("upper_violations", up_v);
    s.int("sharp_violations", sharp_v);
    Ok(Report { table, summary: s, sidecars: vec![] })
}

pub fn run_beta(p: &BetaParams) -> Result<Report> {
    let alpha = order(p.alpha)?;
    let b = inverse_beta_half(alpha);
    let (z0, z1) = (p.z0.unwrap_or(0.0), p.z1.unwrap_or(b));
    let mass = reg_incomplete_beta(alpha, z0, z1)?;
    let eta = pi_csc(alpha) * reg_incomplete_beta(alpha, b.powi(3), b.powi(2))?;
    let mut table = Table::new(["alpha", "z0", "z1", "B", "b_alpha", "eta_alpha"]);
    table.push_row(&[alpha.value(), z0, z1, mass, b, eta]);
    let mut s = Summary::default();
    s.num("alpha", alpha.value());
    s.num("B", mass);
    s.num("b_alpha", b);
    s.num("eta_alpha", eta);
    Ok(Report { table, summary: s, sidecars: vec![] })
}

/// Largest `K` with `a_K` inside the admissible breakpoint range.
fn max_k(alpha: FractionalOrder) -> usize {
    let b = inverse_beta_half(alpha);
    ((cx::MAX_BREAKPOINT.ln() / (1.0 / b).ln()).floor() as usize).max(2)
}

pub fn run_counterexample(p: &CounterexampleParams) -> Result<Report> {
    let alpha = order(p.alpha)?;
    let extreme = p.allow_extreme.unwrap_or(false);
    let k_max = match p.k_max {
        Some(k) => k,
        None => max_k(alpha),
    };
    let spec = if extreme {
        CounterexampleSpec::build_unchecked(alpha, k_max)?
    } else {
        cx::build_spec(alpha, k_max)?
    };
    let n = cx::find_admissible_n(&spec)?;
    let last = (2 * n + 4).min(spec.k_max);
    let horizon = spec.a[last];
    let grid = spec.sampling_grid(horizon, p.rel_step.unwrap_or(1e-2), p.grading.unwrap_or(0.1))?;
    let u = cx::sample_u(&spec, grid.clone())?;
    let mut table = Table::new(["t", "f", "u"]);
    for (&t, &uv) in grid.nodes().iter().zip(u.values()) {
        table.push_row(&[t, cx::eval_f(&spec, t)?, uv]);
    }
    let mut markers = Table::new(["N", "a_2N+1", "a_2N+2", "u_2N+1", "u_2N+2", "gap", "threshold"]);
    let threshold = -spec.eta_alpha / 4.0;
    let mut first_gap = f64::NAN;
    for k in [n, n + 1] {
        if 2 * k + 2 > spec.k_max {
            continue;
        }
        let (lo, hi) = (spec.a[2 * k + 1], spec.a[2 * k + 2]);
        let (ul, uh) = (cx::eval_u(&spec, lo)?, cx::eval_u(&spec, hi)?);
        if k == n {
            first_gap = uh - ul;
        }
        markers.push_row(&[k as f64, lo, hi, ul, uh, uh - ul, threshold]);
    }
    let max_u = u.values().iter().copied().fold(0.0, f64::max);
    let mut s = Summary::default();
    s.num("alpha", alpha.value());
    s.num("b_alpha", spec.b_alpha);
    s.num("eta_alpha", spec.eta_alpha);
    s.int("K_max", spec.k_max);
    s.int("N", n);
    s.num("gap", first_gap);
    s.num("threshold", threshold);
    s.num("max_u", max_u);
    s.num("u_bound", spec.u_bound());
    s.num("u_on_unit_interval", 0.0);
    Ok(Report {
        table,
        summary: s,
        sidecars: vec![("markers".into(), markers)],
    })
}

pub fn run_fode(p: &FodeParams) -> Result<Report> {
    let alpha = order(p.alpha)?;
    let problem = FodeProblem::new(alpha, p.rate.unwrap_or(1.0), p.k.unwrap_or(1.0))?;
    let horizon = p.t.unwrap_or(50.0);
    let steps = p.steps.unwrap_or(2048);
    let kind = p.grid.as_deref().unwrap_or("graded");
    let grid = build_time_grid(kind, horizon, steps, alpha, p.grading, p.switch)?;
    let sol = solve_fode(&problem, &grid)?;
    let eps = p.epsilon.unwrap_or(0.05);
    let env = if horizon >= crate::frac_ode::MIN_ENVELOPE_HORIZON {
        Some(decay_envelope(&sol, eps)?)
    } else {
        None
    };
    let linear = problem.power == 1.0;
    let pw = alpha.value() / problem.power;
    let mut table = Table::new(["t", "E_numeric", "E_exact", "lower_envelope", "upper_envelope"]);
    let mut worst: f64 = 0.0;
    for (&t, &e) in grid.nodes().iter().zip(sol.values()) {
        let exact = if linear { exact_k1(alpha, problem.rate, t)? } else { f64::NAN };
        if linear {
            worst = worst.max(((e - exact) / exact).abs());
        }
        let (lo, up) = match env {
            Some(v) if t >= v.t_star => (v.c_low * t.powf(-pw), v.c_high * t.powf(-pw + eps)),
            _ => (f64::NAN, f64::NAN),
        };
        table.push_row(&[t, e, exact, lo, up]);
    }
    let mut s = Summary::default();
    s.num("alpha", alpha.value());
    s.num("A", problem.rate);
    s.num("k", problem.power);
    s.num("T", horizon);
    s.int("M", steps);
    if linear {
        s.num("max_rel_err", worst);
    }
    let vals = sol.values();
    s.int("nonpositive", vals.iter().filter(|&&e| !(e > 0.0)).count());
    s.int("increases", vals.windows(2).filter(|w| w[1] > w[0]).count());
    if let Some(v) = env {
        s.num("t_star", v.t_star);
        s.num("c_low", v.c_low);
        s.num("c_high", v.c_high);
        s.num("epsilon", v.epsilon);
        s.num("tail_slope", v.slope);
        s.num("target_slope", -pw);
    }
    Ok(Report { table, summary: s, sidecars: vec![] })
}

/// Grid function from the catalog.
///
/// * a number or `const(v)`
/// * `sin2` / `sin2(s)`: `s Σ_k sin²(π x_k)`
/// * `abs_sin(s)`: `s Σ_k |sin(π x_k)|`
/// * `cos(j, s)`: `s Σ_k cos(2π j x_k)`
/// * `dist(x0, s)` (1D) or `dist(x0, y0, s)` (2D): `s` times the periodic
///   distance to a point
/// * `plateau(lo, hi)` / `plateau(lo, hi, s)`: zero for `x ∈ [lo, hi]`,
///   `s sin²(π (x − hi)/(1 − hi + lo))` elsewhere (first coordinate)
/// * `pl(x0:y0, x1:y1, …)`: periodic piecewise-linear in the first coordinate
pub fn parse_function(spec: &str, grid: &TorusGrid, name: &'static str) -> Result<Vec<f64>> {
    let spec = spec.trim();
    let bad = |msg: String| Error::param(name, format!("`{spec}`: {msg}"));
    if let Ok(v) = spec.parse::<f64>() {
        return Ok(vec![v; grid.len()]);
    }
    let (head, args) = match spec.find('(') {
        Some(k) => {
            if !spec.ends_with(')') {
                return Err(bad("missing closing parenthesis".into()));
            }
            (&spec[..k], &spec[k + 1..spec.len() - 1])
        }
        None => (spec, ""),
    };
    let nums = || -> Result<Vec<f64>> {
        if args.trim().is_empty() {
            return Ok(vec![]);
        }
        args.split(',')
            .map(|a| a.trim().parse::<f64>().map_err(|_| bad(format!("`{a}` is not a number"))))
            .collect()
    };
    let dim = grid.dim();
    let arity = |v: &[f64], ok: &[usize]| -> Result<()> {
        if ok.contains(&v.len()) {
            Ok(())
        } else {
            Err(bad(format!("expected {ok:?} arguments, got {}", v.len())))
        }
    };
    let pi = std::f64::consts::PI;
    let sum_axes = |p: [f64; 2], h: &dyn Fn(f64) -> f64| (0..dim).map(|k| h(p[k])).sum::<f64>();
    match head.trim() {
        "const" => {
            let v = nums()?;
            arity(&v, &[1])?;
            Ok(vec![v[0]; grid.len()])
        }
        "sin2" => {
            let v = nums()?;
            arity(&v, &[0, 1])?;
            let s = v.first().copied().unwrap_or(1.0);
            Ok(grid.sample(|p| s * sum_axes(p, &|x| (pi * x).sin().powi(2))))
        }
        "abs_sin" => {
            let v = nums()?;
            arity(&v, &[1])?;
            Ok(grid.sample(|p| v[0] * sum_axes(p, &|x| (pi * x).sin().abs())))
        }
        "cos" => {
            let v = nums()?;
            arity(&v, &[2])?;
            Ok(grid.sample(|p| v[1] * sum_axes(p, &|x| (2.0 * pi * v[0] * x).cos())))
        }
        "dist" => {
            let v = nums()?;
            arity(&v, &[dim + 1])?;
            let target = if dim == 1 { [v[0], 0.0] } else { [v[0], v[1]] };
            let s = v[dim];
            Ok(grid.sample(|p| s * grid.distance(p, target)))
        }
        "plateau" => {
            let v = nums()?;
            arity(&v, &[2, 3])?;
            let (lo, hi) = (v[0], v[1]);
            if !(0.0 <= lo && lo < hi && hi < 1.0) {
                return Err(bad("need 0 <= lo < hi < 1".into()));
            }
            let s = v.get(2).copied().unwrap_or(1.0);
            let gap = 1.0 - hi + lo;
            Ok(grid.sample(|p| {
                let x = p[0];
                if (lo..=hi).contains(&x) {
                    0.0
                } else {
                    s * (pi * (x - hi).rem_euclid(1.0) / gap).sin().powi(2)
                }
            }))
        }
        "pl" => {
            let mut pts = Vec::new();
            for pair in args.split(',') {
                let (x, y) = pair
                    .split_once(':')
                    .ok_or_else(|| bad(format!("`{pair}` is not x:y")))?;
                let x: f64 = x.trim().parse().map_err(|_| bad(format!("`{x}` is not a number")))?;
                let y: f64 = y.trim().parse().map_err(|_| bad(format!("`{y}` is not a number")))?;
                if !(0.0..1.0).contains(&x) {
                    return Err(bad(format!("abscissa {x} outside [0, 1)")));
                }
                pts.push((x, y));
            }
            if pts.is_empty() {
                return Err(bad("needs at least one point".into()));
            }
            if pts.windows(2).any(|w| w[1].0 <= w[0].0) {
                return Err(bad("abscissae must increase".into()));
            }
            Ok(grid.sample(|p| periodic_linear(&pts, p[0])))
        }
        other => Err(bad(format!(
            "unknown function `{other}` (const, sin2, abs_sin, cos, dist, plateau, pl)"
        ))),
    }
}

fn periodic_linear(pts: &[(f64, f64)], x: f64) -> f64 {
    if pts.len() == 1 {
        return pts[0].1;
    }
    let k = pts.iter().rposition(|&(px, _)| px <= x);
    let (left, right) = match k {
        Some(k) if k + 1 < pts.len() => (pts[k], pts[k + 1]),
        Some(k) => (pts[k], (pts[0].0 + 1.0, pts[0].1)),
        None => {
            let l = pts[pts.len() - 1];
            ((l.0 - 1.0, l.1), pts[0])
        }
    };
    let s = (x - left.0) / (right.0 - left.0);
    left.1 + s * (right.1 - left.1)
}

pub fn run_hj(p: &HjParams) -> Result<Report> {
    let alpha = order(p.alpha)?;
    let grid = TorusGrid::new(p.dim.unwrap_or(1), p.n.unwrap_or(256))?;
    let a = parse_function(p.a.as_deref().unwrap_or("const(1)"), &grid, "a")?;
    let f = parse_function(p.f.as_deref().unwrap_or("sin2"), &grid, "f")?;
    let g = parse_function(p.g.as_deref().unwrap_or("const(0)"), &grid, "g")?;
    let mut problem = EikonalProblem::new(grid, alpha, p.m.unwrap_or(1.0), a, f, g)?;
    if let Some(l) = p.lip_g {
        problem = problem.with_lipschitz(l)?;
    }
    let horizon = p.t.unwrap_or(200.0);
    let steps = p.steps.unwrap_or(4096);
    let kind = p.grid.as_deref().unwrap_or("graded");
    let tgrid = build_time_grid(kind, horizon, steps, alpha, p.grading, None)?;
    let opts = EvolveOptions {
        tol: p.tol.unwrap_or(1e-10),
        ..EvolveOptions::default()
    };
    let erg = hj::solve_ergodic(&problem);
    let sol = hj::evolve_with(&problem, &tgrid, opts)?;
    let snaps = match &p.snapshots {
        Some(v) if !v.is_empty() => v.clone(),
        _ => vec![horizon],
    };
    for &t in &snaps {
        if !(0.0..=horizon).contains(&t) {
            return Err(Error::param("snapshots", format!("{t} outside [0, {horizon}]")));
        }
    }
    let snap_nodes: Vec<usize> = snaps.iter().map(|&t| tgrid.nearest_node(t)).collect();

    let mut names = vec!["x".to_string()];
    if grid.dim() == 2 {
        names.push("y".into());
    }
    names.push("v".into());
    for &j in &snap_nodes {
        names.push(format!("u@{}", fmt_f64(tgrid.nodes()[j])));
    }
    let mut table = Table::new(names);
    for k in 0..grid.len() {
        let pt = grid.point(k);
        let mut row = vec![pt[0]];
        if grid.dim() == 2 {
            row.push(pt[1]);
        }
        row.push(erg.v[k]);
        for &j in &snap_nodes {
            row.push(sol.states[j][k]);
        }
        table.push_row(&row);
    }

    let mut s = Summary::default();
    s.num("alpha", alpha.value());
    s.num("m", problem.m);
    s.int("dim", grid.dim());
    s.int("n", grid.n());
    s.num("T", horizon);
    s.int("M", steps);
    s.num("c", erg.c);
    s.int("aubry_set_size", erg.z.len());
    s.num("lip_g", problem.lip_g);
    s.int("max_sweeps", sol.sweeps.iter().copied().max().unwrap_or(0));
    s.num("explicit_stability_number", problem.explicit_stability_number(&tgrid));
    s.num("holder_seminorm", hj::holder_seminorm_time(&sol)?);
    match hj::holder_seminorm_until(&sol, horizon / 2.0) {
        Ok(v) => s.num("holder_seminorm_half_horizon", v),
        Err(_) => s.text("holder_seminorm_half_horizon", "n/a"),
    }
    for (&t, &j) in snaps.iter().zip(&snap_nodes) {
        s.num(&format!("gap@{}", fmt_f64(t)), hj::asymptotic_gap(&sol, &erg, j));
    }
    let bar = hj::check_barriers(&sol);
    s.num("barrier_constant", bar.constant);
    s.int("barrier_violations", bar.violations);
    s.num("barrier_upper_margin", bar.upper_margin);
    s.num("barrier_lower_margin", bar.lower_margin);
    let ell = match p.ell_gamma {
        Some(l) => Some(l),
        None if erg.z.len() == 1 => Some(0.0),
        None => None,
    };
    match ell {
        Some(ell) => {
            let rate = hj::aubry_rate(&problem, problem.lip_g.max(f64::MIN_POSITIVE), ell)?;
            let e = solve_fode(&FodeProblem::new(alpha, rate, problem.m)?, &tgrid)?;
            match hj::aubry_decay_check(&sol, &erg, &e, ell) {
                Ok(r) => {
                    s.num("aubry_rate_A", rate);
                    s.int("aubry_violations", r.violations);
                    s.num("aubry_lower_margin", r.lower_margin);
                    s.num("aubry_upper_margin", r.upper_margin);
                }
                Err(Error::AssumptionViolated(msg)) => s.text("aubry_check", format!("skipped: {msg}")),
                Err(e) => return Err(e),
            }
        }
        None => s.text("aubry_check", "skipped: ell_gamma not given and Z has several points"),
    }
    Ok(Report { table, summary: s, sidecars: vec![] })
}

pub fn run_rate(p: &RateParams) -> Result<Report> {
    let alpha = order(p.alpha)?;
    let d = required(p.d, "D")?;
    let t = p.t.unwrap_or(100.0);
    let r = hj::eikonal_rate(d, alpha, t)?;
    let mut table = Table::new(["D", "alpha", "t", "eps_opt", "bound", "exponent", "doubling_exponent", "decaying"]);
    table.push_row(&[
        d,
        alpha.value(),
        t,
        r.eps_opt,
        r.bound,
        r.exponent,
        r.doubling_exponent,
        f64::from(u8::from(r.decaying)),
    ]);
    let mut s = Summary::default();
    s.num("D", d);
    s.num("alpha", alpha.value());
    s.num("t", t);
    s.num("eps_opt", r.eps_opt);
    s.num("bound", r.bound);
    s.num("exponent", r.exponent);
    s.num("doubling_exponent", r.doubling_exponent);
    s.text("decaying", r.decaying.to_string());
    Ok(Report { table, summary: s, sidecars: vec![] })
}

/// Resolves parameters and runs the subcommand, returning its report and
/// the output location.
pub fn dispatch(command: &Command) -> Result<(Report, Option<PathBuf>)> {
    macro_rules! go {
        ($inv:expr, $ty:ty, $run:ident) => {{
            let (p, out) = resolve($inv, <$ty>::overlay)?;
            let out = out.or_else(|| p.out.clone());
            Ok(($run(&p)?, out))
        }};
    }
    match command {
        Command::Caputo(i) => go!(i, CaputoParams, run_caputo),
        Command::Mlf(i) => go!(i, MlfParams, run_mlf),
        Command::Beta(i) => go!(i, BetaParams, run_beta),
        Command::Counterexample(i) => go!(i, CounterexampleParams, run_counterexample),
        Command::Fode(i) => go!(i, FodeParams, run_fode),
        Command::Hj(i) => go!(i, HjParams, run_hj),
        Command::Rate(i) => go!(i, RateParams, run_rate),
    }
}

/// Writes the report under `out` following the naming rules above.
pub fn write_outputs(report: &Report, out: &Path, subcommand: &str) -> Result<()> {
    let is_csv = out.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let (main, prefix) = if is_csv {
        let stem = out.with_extension("");
        (out.to_path_buf(), stem.into_os_string())
    } else {
        fs::create_dir_all(out).map_err(|e| Error::Io(format!("{}: {e}", out.display())))?;
        (out.join(format!("{subcommand}.csv")), out.join(subcommand).into_os_string())
    };
    if let Some(parent) = main.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::Io(format!("{}: {e}", parent.display())))?;
    }
    emit_csv(&report.table, &main)?;
    let sidecar = |suffix: &str| {
        let mut p = prefix.clone();
        p.push(suffix);
        PathBuf::from(p)
    };
    let summary = sidecar("_summary.txt");
    fs::write(&summary, report.summary.render()).map_err(|e| Error::Io(format!("{}: {e}", summary.display())))?;
    for (name, table) in &report.sidecars {
        emit_csv(table, &sidecar(&format!("_{name}.csv")))?;
    }
    Ok(())
}

/// Exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io(_) => 1,
        e if e.is_validation() => 2,
        _ => 3,
    }
}

/// Entry point used by the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let name = cli.command.name();
    let result = dispatch(&cli.command).and_then(|(report, out)| {
        if let Some(out) = out {
            write_outputs(&report, &out, name)?;
        }
        Ok(report)
    });
    match result {
        Ok(report) => {
            print!("{}", report.summary.render());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
