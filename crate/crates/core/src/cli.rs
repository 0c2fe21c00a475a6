//! Command implementations behind the `lsfem` binary.
//!
//! Settings come from a flat `key = value` config file and from command-line
//! flags; flags win. Every command writes CSV and returns a process exit
//! code: 0 converged, 2 unconverged (artifacts still written), 1 error.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::adapt::{solve_adaptive, AdaptOptions};
use crate::error::Error;
use crate::metrics::{convergence_study, l2_error, max_error, ConvergenceStudy, Method, StudyOptions};
use crate::objective::{Discretization, Weighting};
use crate::problem::{self, OdeSystem};
use crate::rk::{integrate, RkMethod};
use crate::solver::{solve_auto, SolveReport, SolverOptions};
use crate::spline::SplineSpace;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_UNCONVERGED: i32 = 2;

/// Keys accepted in config files (flags use the same names with `-`).
pub const KEYS: [&str; 22] = [
    "problem",
    "km",
    "degree",
    "elements",
    "mesh",
    "quad_points",
    "tol",
    "max_iter",
    "multistart",
    "seed",
    "out",
    "weighting",
    "init_elements",
    "max_rounds",
    "max_control_points",
    "fdm",
    "skip_coarsest",
    "a",
    "b",
    "g",
    "t0",
    "t_end",
];

#[derive(Debug, Clone, PartialEq)]
pub struct CliError(pub String);

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Raw settings with the place each value came from.
#[derive(Debug, Clone, Default)]
pub struct Settings {
    values: BTreeMap<String, (String, String)>,
}

impl Settings {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse_config(text: &str, source: &str) -> CliResult<Self> {
        let mut s = Settings::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let origin = format!("{source}:{}", i + 1);
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError(format!("{origin}: expected 'key = value', got '{line}'")))?;
            let key = k.trim().replace('-', "_");
            if !KEYS.contains(&key.as_str()) {
                return Err(CliError(format!("{origin}: unknown key '{}'", k.trim())));
            }
            s.values.insert(key, (v.trim().to_string(), origin));
        }
        Ok(s)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse_config(&text, &path.display().to_string())
    }

    /// Sets `key` from a command-line flag, replacing any config value.
    pub fn set_flag(&mut self, key: &str, value: impl Into<String>) {
        let key = key.replace('-', "_");
        let origin = format!("--{}", key.replace('_', "-"));
        self.values.insert(key, (value.into(), origin));
    }

    fn raw(&self, key: &str) -> Option<&(String, String)> {
        self.values.get(key)
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> CliResult<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some((v, origin)) => v
                .parse::<T>()
                .map(Some)
                .map_err(|_| CliError(format!("{origin}: invalid value '{v}' for '{key}'"))),
        }
    }

    fn get_with<T>(&self, key: &str, f: impl Fn(&str) -> Option<T>) -> CliResult<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some((v, origin)) => f(v)
                .map(Some)
                .ok_or_else(|| CliError(format!("{origin}: invalid value '{v}' for '{key}'"))),
        }
    }
}

/// `1,2,5` or ranges `a:b` / `a:b:step`, mixed freely.
pub fn parse_usize_list(s: &str) -> Option<Vec<usize>> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let nums: Vec<usize> = part.split(':').map(|p| p.trim().parse().ok()).collect::<Option<_>>()?;
        match nums.as_slice() {
            [n] => out.push(*n),
            [a, b] => out.extend(*a..=*b),
            [a, b, step] if *step > 0 => out.extend((*a..=*b).step_by(*step)),
            _ => return None,
        }
    }
    Some(out)
}

fn parse_f64_list(s: &str) -> Option<Vec<f64>> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| p.parse().ok())
        .collect()
}

/// One term of a forcing component.
#[derive(Debug, Clone, PartialEq)]
pub enum Term {
    /// `c`
    Const(f64),
    /// `c e^{r t}`
    Exp(f64, f64),
    /// `c sin(w t)`
    Sin(f64, f64),
    /// `c0 + c1 t + c2 t² + …`
    Poly(Vec<f64>),
}

impl Term {
    fn eval(&self, t: f64) -> f64 {
        match self {
            Self::Const(c) => *c,
            Self::Exp(c, r) => c * (r * t).exp(),
            Self::Sin(c, w) => c * (w * t).sin(),
            Self::Poly(cs) => cs.iter().rev().fold(0.0, |acc, c| acc * t + c),
        }
    }

    fn parse(s: &str) -> Option<Self> {
        let mut it = s.trim().split(':');
        let name = it.next()?.trim();
        let args: Vec<f64> = it.map(|p| p.trim().parse().ok()).collect::<Option<_>>()?;
        match (name, args.as_slice()) {
            ("zero", []) => Some(Self::Const(0.0)),
            ("const", [c]) => Some(Self::Const(*c)),
            ("exp", [c, r]) => Some(Self::Exp(*c, *r)),
            ("sin", [c, w]) => Some(Self::Sin(*c, *w)),
            ("poly", cs) if !cs.is_empty() => Some(Self::Poly(cs.to_vec())),
            _ => None,
        }
    }
}

/// `y' = A y + b(t)` with constant `A` and catalog forcing.
#[derive(Debug, Clone, PartialEq)]
pub struct CustomLinear {
    pub a: Vec<f64>,
    /// Per component, a sum of terms.
    pub b: Vec<Vec<Term>>,
    pub g: Vec<f64>,
    pub t0: f64,
    pub t_end: f64,
}

impl CustomLinear {
    pub fn build(&self) -> crate::Result<OdeSystem> {
        let d = self.g.len();
        let a = self.a.clone();
        let b = self.b.clone();
        OdeSystem::linear(
            "linear",
            self.t0,
            self.t_end,
            self.g.clone(),
            move |_t, m| m.copy_from_slice(&a),
            move |t, v| {
                for c in 0..d {
                    v[c] = b[c].iter().map(|term| term.eval(t)).sum();
                }
            },
        )
    }
}

/// Fully resolved settings for one command.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    pub degrees: Vec<usize>,
    pub elements: Option<Vec<usize>>,
    pub mesh: Option<Vec<f64>>,
    pub quad_points: Option<usize>,
    pub tol: f64,
    pub solver: SolverOptions,
    pub weighting: Weighting,
    pub adapt: AdaptOptions,
    pub fdm: Vec<RkMethod>,
    pub skip_coarsest: usize,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSpec {
    Builtin { name: String, km: f64 },
    Linear(CustomLinear),
}

impl ProblemSpec {
    pub fn build(&self) -> crate::Result<OdeSystem> {
        match self {
            Self::Builtin { name, km } if name == "michaelis_menten" => problem::michaelis_menten(*km),
            Self::Builtin { name, .. } => problem::builtin(name),
            Self::Linear(l) => l.build(),
        }
    }
}

impl RunConfig {
    pub fn from_settings(s: &Settings) -> CliResult<Self> {
        let name: String = s
            .get("problem")?
            .ok_or_else(|| CliError("missing required field 'problem'".into()))?;
        let problem = if name == "linear" {
            let a = s
                .get_with("a", |v| {
                    v.split(';').map(parse_f64_list).collect::<Option<Vec<_>>>()
                })?
                .ok_or_else(|| CliError("linear problem needs field 'a'".into()))?;
            let g = s
                .get_with("g", parse_f64_list)?
                .ok_or_else(|| CliError("linear problem needs field 'g'".into()))?;
            let d = g.len();
            if d == 0 || a.len() != d || a.iter().any(|row| row.len() != d) {
                return Err(CliError(format!("field 'a' must be a {d}x{d} matrix matching 'g'")));
            }
            let b = s
                .get_with("b", |v| {
                    v.split(';')
                        .map(|comp| comp.split('+').map(Term::parse).collect::<Option<Vec<_>>>())
                        .collect::<Option<Vec<_>>>()
                })?
                .unwrap_or_else(|| vec![vec![Term::Const(0.0)]; d]);
            if b.len() != d {
                return Err(CliError(format!("field 'b' needs {d} components separated by ';'")));
            }
            ProblemSpec::Linear(CustomLinear {
                a: a.into_iter().flatten().collect(),
                b,
                g,
                t0: s.get("t0")?.unwrap_or(0.0),
                t_end: s.get("t_end")?.unwrap_or(1.0),
            })
        } else {
            if !problem::BUILTIN_NAMES.contains(&name.as_str()) {
                return Err(CliError(format!(
                    "field 'problem': unknown problem '{name}' (expected one of {}, linear)",
                    problem::BUILTIN_NAMES.join(", ")
                )));
            }
            ProblemSpec::Builtin {
                name,
                km: s.get("km")?.unwrap_or(problem::DEFAULT_KM),
            }
        };

        let defaults = SolverOptions::default();
        let solver = SolverOptions {
            max_iterations: s.get("max_iter")?.unwrap_or(defaults.max_iterations),
            multistart: s.get("multistart")?.unwrap_or(defaults.multistart),
            seed: s.get("seed")?.unwrap_or(defaults.seed),
            ..defaults
        };
        solver.validate()?;
        let weighting = s.get("weighting")?.unwrap_or_default();
        let adapt_defaults = AdaptOptions::default();
        let tol = s.get("tol")?.unwrap_or(adapt_defaults.abs_tol);
        let degrees = s.get_with("degree", parse_usize_list)?.unwrap_or_default();
        let quad_points: Option<usize> = s.get("quad_points")?;
        let adapt = AdaptOptions {
            abs_tol: tol,
            max_rounds: s.get("max_rounds")?.unwrap_or(adapt_defaults.max_rounds),
            max_control_points: s
                .get("max_control_points")?
                .unwrap_or(adapt_defaults.max_control_points),
            init_elements: s.get("init_elements")?.unwrap_or(adapt_defaults.init_elements),
            degree: degrees.first().copied().unwrap_or(adapt_defaults.degree),
            points_per_element: quad_points.unwrap_or(adapt_defaults.points_per_element),
            weighting,
        };
        let fdm = s
            .get_with("fdm", |v| {
                v.split(',')
                    .map(str::trim)
                    .filter(|p| !p.is_empty())
                    .map(|p| p.parse().ok())
                    .collect::<Option<Vec<RkMethod>>>()
            })?
            .unwrap_or_default();
        Ok(Self {
            problem,
            degrees,
            elements: s.get_with("elements", parse_usize_list)?,
            mesh: s.get_with("mesh", parse_f64_list)?,
            quad_points,
            tol,
            solver,
            weighting,
            adapt,
            fdm,
            skip_coarsest: s.get("skip_coarsest")?.unwrap_or(2),
            out: s.get::<String>("out")?.map(PathBuf::from),
        })
    }

    fn single_degree(&self, default: usize) -> CliResult<usize> {
        match self.degrees.as_slice() {
            [] => Ok(default),
            [k] => Ok(*k),
            _ => Err(CliError("field 'degree': this command takes a single degree".into())),
        }
    }

    fn space(&self, sys: &OdeSystem, degree: usize) -> CliResult<SplineSpace> {
        if let Some(tau) = &self.mesh {
            if tau.first() != Some(&sys.t0) || tau.last() != Some(&sys.t_end) {
                return Err(CliError(format!(
                    "field 'mesh' must start at t0 = {} and end at T = {}",
                    sys.t0, sys.t_end
                )));
            }
            return Ok(SplineSpace::new(degree, tau)?);
        }
        let n = match self.elements.as_deref() {
            None => 10,
            Some([n]) => *n,
            Some(_) => return Err(CliError("field 'elements': this command takes a single count".into())),
        };
        Ok(SplineSpace::uniform(degree, sys.t0, sys.t_end, n)?)
    }
}

/// Full-precision, round-trip number formatting.
pub fn fmt_num(v: f64) -> String {
    format!("{v:?}")
}

/// Samples the solution at 200 uniform points plus the breakpoints.
pub fn solution_csv(sys: &OdeSystem, rep: &SolveReport) -> CliResult<String> {
    let d = sys.dim;
    let (a, b) = (sys.t0, sys.t_end);
    let mut ts: Vec<f64> = (0..200)
        .map(|i| if i == 199 { b } else { a + (b - a) * i as f64 / 199.0 })
        .collect();
    ts.extend_from_slice(rep.space.control_points());
    ts.sort_by(|x, y| x.total_cmp(y));
    let has_exact = sys.exact.is_some();
    let mut out = String::from("t");
    for c in 1..=d {
        write!(out, ",y_{c}").unwrap();
    }
    if has_exact {
        for c in 1..=d {
            write!(out, ",exact_{c}").unwrap();
        }
        out.push_str(",abs_err");
    }
    out.push('\n');
    for t in ts {
        let y = rep.eval(t)?;
        out.push_str(&fmt_num(t));
        for v in &y {
            write!(out, ",{}", fmt_num(*v)).unwrap();
        }
        if let Some(e) = sys.eval_exact(t) {
            for v in &e {
                write!(out, ",{}", fmt_num(*v)).unwrap();
            }
            let err = y.iter().zip(&e).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
            write!(out, ",{}", fmt_num(err)).unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn history_csv(rep: &SolveReport) -> String {
    let mut out = String::from("round,n_control_points,worst_residual,objective\n");
    for r in rep.refinement_history.iter().flatten() {
        writeln!(
            out,
            "{},{},{},{}",
            r.round,
            r.control_points.len(),
            fmt_num(r.worst_element_residual),
            fmt_num(r.objective)
        )
        .unwrap();
    }
    out
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, contents).map_err(|e| CliError(format!("cannot write {}: {e}", path.display())))
}

fn exit_for(converged: bool) -> i32 {
    if converged {
        EXIT_OK
    } else {
        EXIT_UNCONVERGED
    }
}

pub fn cmd_solve(cfg: &RunConfig) -> CliResult<i32> {
    let sys = cfg.problem.build()?;
    let k = cfg.single_degree(3)?;
    let space = cfg.space(&sys, k)?;
    let disc = Discretization::build(space, cfg.quad_points.unwrap_or(k + 1), cfg.weighting)?;
    let rep = solve_auto(&disc, &sys, &cfg.solver)?;
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("solution.csv"));
    write_file(&out, &solution_csv(&sys, &rep)?)?;
    println!("objective={}", fmt_num(rep.objective_final));
    println!("iterations={}", rep.iterations);
    println!("converged_by={}", rep.converged_by.as_str());
    if sys.exact.is_some() {
        let n = 10 * rep.space.n_elements() * (k + 1);
        println!("max_error={}", fmt_num(max_error(&rep.space, &rep.x_star, &sys, n)?));
    }
    Ok(exit_for(rep.converged))
}

pub fn cmd_adapt(cfg: &RunConfig) -> CliResult<i32> {
    let sys = cfg.problem.build()?;
    let rep = solve_adaptive(&sys, &cfg.adapt, &cfg.solver)?;
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("adapt.csv"));
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("adapt");
    let history = out.with_file_name(format!("{stem}_history.csv"));
    write_file(&out, &solution_csv(&sys, &rep)?)?;
    write_file(&history, &history_csv(&rep))?;
    let rounds = rep.refinement_history.as_ref().map_or(0, Vec::len);
    println!("rounds={rounds}");
    println!("control_points={}", rep.space.control_points().len());
    println!("worst_residual={}", fmt_num(rep.worst_element()));
    println!("objective={}", fmt_num(rep.objective_final));
    if sys.exact.is_some() {
        let n = 10 * rep.space.n_elements() * (cfg.adapt.degree + 1);
        println!("max_error={}", fmt_num(max_error(&rep.space, &rep.x_star, &sys, n)?));
    }
    if !rep.converged {
        eprintln!("adaptive refinement stopped before reaching tol {}", cfg.adapt.abs_tol);
    }
    Ok(exit_for(rep.converged))
}

fn study_options(cfg: &RunConfig, sys: &OdeSystem) -> CliResult<StudyOptions> {
    let base = StudyOptions::unit_steps(sys);
    let elements = match &cfg.elements {
        Some(list) if list.is_empty() => return Err(CliError("field 'elements': empty mesh list".into())),
        Some(list) => list.clone(),
        None => base.elements.clone(),
    };
    if cfg.mesh.is_some() {
        return Err(CliError("field 'mesh' is not used by this command; give 'elements'".into()));
    }
    Ok(StudyOptions {
        elements,
        points_per_element: cfg.quad_points,
        weighting: cfg.weighting,
        solver: cfg.solver.clone(),
        skip_coarsest: cfg.skip_coarsest,
        ..base
    })
}

pub fn cmd_convergence(cfg: &RunConfig) -> CliResult<i32> {
    let sys = cfg.problem.build()?;
    let opts = study_options(cfg, &sys)?;
    let mut methods: Vec<Method> = if cfg.degrees.is_empty() {
        vec![Method::Spline { degree: 1 }]
    } else {
        cfg.degrees.iter().map(|&degree| Method::Spline { degree }).collect()
    };
    methods.extend(cfg.fdm.iter().map(|&m| Method::Rk(m)));
    let studies: Vec<ConvergenceStudy> = methods
        .par_iter()
        .map(|&m| convergence_study(&sys, m, &opts))
        .collect::<crate::Result<_>>()?;
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir)?;
    println!("{:<8} {:>10}", "method", "slope");
    for st in &studies {
        write_file(&dir.join(format!("convergence_{}.csv", st.label)), &st.to_csv())?;
        println!("{:<8} {:>10.4}", st.label, st.slope);
    }
    Ok(EXIT_OK)
}

pub fn cmd_compare_fdm(cfg: &RunConfig) -> CliResult<i32> {
    let sys = cfg.problem.build()?;
    if sys.exact.is_none() {
        return Err(Error::NoReference.into());
    }
    let k = cfg.single_degree(3)?;
    let opts = study_options(cfg, &sys)?;
    let methods = if cfg.fdm.is_empty() {
        vec![RkMethod::Rk3, RkMethod::Rk4]
    } else {
        cfg.fdm.clone()
    };
    let len = sys.t_end - sys.t0;
    let mut elements = opts.elements.clone();
    elements.sort_unstable();
    elements.dedup();
    let rows: Vec<String> = elements
        .par_iter()
        .map(|&n| -> CliResult<String> {
            let h = len / n as f64;
            let space = SplineSpace::uniform(k, sys.t0, sys.t_end, n)?;
            let disc = Discretization::build(space, cfg.quad_points.unwrap_or(k + 1), cfg.weighting)?;
            let rep = solve_auto(&disc, &sys, &cfg.solver)?;
            let samples = 10 * n * (k + 1);
            let mut row = format!(
                "{},{},{}",
                fmt_num(h),
                fmt_num(l2_error(&rep.space, &rep.x_star, &sys, 4)?),
                fmt_num(max_error(&rep.space, &rep.x_star, &sys, samples)?)
            );
            for &m in &methods {
                match integrate(&sys, m, h) {
                    Ok(tr) => {
                        write!(row, ",{},{}", fmt_num(tr.nodal_l2_error(&sys)?), fmt_num(tr.max_nodal_error(&sys)?))
                            .unwrap()
                    }
                    Err(Error::BlowUp { .. }) => row.push_str(",inf,inf"),
                    Err(e) => return Err(e.into()),
                }
            }
            Ok(row)
        })
        .collect::<CliResult<_>>()?;
    let mut csv = String::from("h,lsfem_l2,lsfem_max");
    for m in &methods {
        write!(csv, ",{0}_l2,{0}_max", m.name()).unwrap();
    }
    csv.push('\n');
    for r in &rows {
        csv.push_str(r);
        csv.push('\n');
    }
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("compare_fdm.csv"));
    write_file(&out, &csv)?;
    print!("{csv}");
    Ok(EXIT_OK)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Convergence,
    Adapt,
    CompareFdm,
}

/// Resolves settings and runs `cmd`, reporting errors on stderr.
pub fn run(cmd: Command, settings: &Settings) -> i32 {
    let result = RunConfig::from_settings(settings).and_then(|cfg| match cmd {
        Command::Solve => cmd_solve(&cfg),
        Command::Convergence => cmd_convergence(&cfg),
        Command::Adapt => cmd_adapt(&cfg),
        Command::CompareFdm => cmd_compare_fdm(&cfg),
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}
