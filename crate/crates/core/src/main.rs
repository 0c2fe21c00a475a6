use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lsfem::cli::{self, Command, Settings};

#[derive(Parser)]
#[command(name = "lsfem", version, about = "Least-squares spline solver for ODE initial value problems")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve on a fixed mesh and write solution samples.
    Solve(Flags),
    /// Measure L² errors over a mesh sequence and fit rates.
    Convergence(Flags),
    /// Refine the mesh until every element residual meets --tol.
    Adapt(Flags),
    /// Compare against fixed-step Runge–Kutta on the same meshes.
    CompareFdm(Flags),
}

#[derive(Args)]
struct Flags {
    /// Built-in problem (fig1, decay, logistic, michaelis_menten) or `linear`.
    #[arg(long)]
    problem: Option<String>,
    /// Config file of `key = value` lines; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Spline degree, or a list such as `1:5` for `convergence`.
    #[arg(long)]
    degree: Option<String>,
    /// Element count, or a list such as `30:200:10`.
    #[arg(long)]
    elements: Option<String>,
    /// Explicit breakpoints, comma separated.
    #[arg(long)]
    mesh: Option<String>,
    /// Gauss points per element.
    #[arg(long)]
    quad_points: Option<String>,
    /// Element residual tolerance for `adapt`.
    #[arg(long)]
    tol: Option<String>,
    #[arg(long)]
    max_iter: Option<String>,
    #[arg(long)]
    multistart: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Output file (directory for `convergence`).
    #[arg(long)]
    out: Option<String>,
    /// `l2` or `plain`.
    #[arg(long)]
    weighting: Option<String>,
    /// Michaelis–Menten constant.
    #[arg(long)]
    km: Option<String>,
    /// Runge–Kutta baselines, e.g. `rk3,rk4`.
    #[arg(long)]
    fdm: Option<String>,
    #[arg(long)]
    init_elements: Option<String>,
    #[arg(long)]
    max_rounds: Option<String>,
    #[arg(long)]
    max_control_points: Option<String>,
    /// Coarsest meshes left out of the rate fit.
    #[arg(long)]
    skip_coarsest: Option<String>,
}

impl Flags {
    fn settings(&self) -> Result<Settings, cli::CliError> {
        let mut s = match &self.config {
            Some(path) => Settings::load(path)?,
            None => Settings::default(),
        };
        let flags = [
            ("problem", &self.problem),
            ("degree", &self.degree),
            ("elements", &self.elements),
            ("mesh", &self.mesh),
            ("quad_points", &self.quad_points),
            ("tol", &self.tol),
            ("max_iter", &self.max_iter),
            ("multistart", &self.multistart),
            ("seed", &self.seed),
            ("out", &self.out),
            ("weighting", &self.weighting),
            ("km", &self.km),
            ("fdm", &self.fdm),
            ("init_elements", &self.init_elements),
            ("max_rounds", &self.max_rounds),
            ("max_control_points", &self.max_control_points),
            ("skip_coarsest", &self.skip_coarsest),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                s.set_flag(key, v.clone());
            }
        }
        Ok(s)
    }
}

fn main() -> ExitCode {
    let parsed = match Cli::try_parse() {
        Ok(p) => p,
        Err(e) => {
            let code = if e.use_stderr() { cli::EXIT_ERROR } else { cli::EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let (cmd, flags) = match &parsed.command {
        Cmd::Solve(f) => (Command::Solve, f),
        Cmd::Convergence(f) => (Command::Convergence, f),
        Cmd::Adapt(f) => (Command::Adapt, f),
        Cmd::CompareFdm(f) => (Command::CompareFdm, f),
    };
    let code = match flags.settings() {
        Ok(s) => cli::run(cmd, &s),
        Err(e) => {
            eprintln!("error: {e}");
            cli::EXIT_ERROR
        }
    };
    ExitCode::from(code as u8)
}
