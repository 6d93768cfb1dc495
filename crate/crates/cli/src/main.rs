mod config;

use std::io::{ErrorKind, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use switchopt::experiments::{
    gradient_check, ode_counterexample, run_all, run_case, Assembly, Case, Preset, ProblemSpec, RunOptions,
    RunSummary, FD_STEP, HORIZON,
};
use switchopt::objective::GradientMode;
use switchopt::optimizer::OptimizerConfig;
use switchopt::parabolic::Nonlinearity;
use switchopt::projection::project;

use config::{parse_vector, ConfigFile};

const GRADIENT_TOL: f64 = 1e-5;

#[derive(Parser)]
#[command(name = "switchopt", version, about = "Switching-time optimization for the heat equation")]
struct Cli {
    /// `key = value` file supplying defaults for any flag of the subcommand
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize one case from one starting point
    Run(RunArgs),
    /// Run all four cases from the five standard starting points
    RunAll(RunAllArgs),
    /// Project a vector onto the ordered switching times in [0, T]
    Project(ProjectArgs),
    /// Compare the adjoint gradient with central differences
    CheckGradient(CheckArgs),
    /// One-sided derivatives of the scalar ODE counterexample
    DemoOde(OdeArgs),
}

#[derive(Args)]
struct SolverArgs {
    /// desk (nx=20, k=250) or fine (nx=40, k=1000)
    #[arg(long)]
    preset: Option<Preset>,
    /// Sufficient-decrease parameter in (0, 1)
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// interpolated (default) or discrete
    #[arg(long)]
    gradient: Option<GradientMode>,
    /// zero (default), sin or arctan
    #[arg(long)]
    nonlinearity: Option<Nonlinearity>,
    /// Start backtracking from the previously accepted L
    #[arg(long)]
    warm_start: bool,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// i, ii, iii or iv
    #[arg(long)]
    case: Option<Case>,
    /// Initial switching times, comma separated
    #[arg(long, allow_hyphen_values = true)]
    tau0: Option<String>,
    /// Also write the optimal state to trajectory.txt
    #[arg(long)]
    trajectory: bool,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct RunAllArgs {
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct ProjectArgs {
    /// Vector to project, comma or whitespace separated
    #[arg(long, allow_hyphen_values = true)]
    tau: Option<String>,
    #[arg(long)]
    horizon: Option<f64>,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    preset: Option<Preset>,
    #[arg(long)]
    nonlinearity: Option<Nonlinearity>,
    #[arg(long)]
    alpha: Option<f64>,
}

#[derive(Args)]
struct OdeArgs {
    #[arg(long, allow_hyphen_values = true)]
    psi1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    slope: Option<f64>,
    #[arg(long)]
    tau_bar: Option<f64>,
}

enum Failure {
    Config(String),
    Solver(switchopt::Error),
}

impl From<switchopt::Error> for Failure {
    fn from(e: switchopt::Error) -> Self {
        if e.is_invalid_input() {
            Failure::Config(e.to_string())
        } else {
            Failure::Solver(e)
        }
    }
}

impl From<String> for Failure {
    fn from(msg: String) -> Self {
        Failure::Config(msg)
    }
}

const SOLVER_KEYS: [&str; 7] = [
    "preset",
    "gamma",
    "max-iters",
    "gradient",
    "nonlinearity",
    "warm-start",
    "out-dir",
];

struct Resolved {
    preset: Preset,
    nonlinearity: Nonlinearity,
    options: RunOptions,
}

fn resolve_solver(args: SolverArgs, file: &ConfigFile) -> Result<Resolved, Failure> {
    let preset = file.pick(args.preset, "preset")?.unwrap_or(Preset::Desk);
    let defaults = OptimizerConfig::default();
    let optimizer = OptimizerConfig {
        gamma: file.pick(args.gamma, "gamma")?.unwrap_or(defaults.gamma),
        max_iters: file.pick(args.max_iters, "max-iters")?.unwrap_or(defaults.max_iters),
        warm_start_l: file.pick_flag(args.warm_start, "warm-start")?,
        ..defaults
    };
    optimizer.validate()?;
    let options = RunOptions {
        optimizer,
        gradient: file
            .pick(args.gradient, "gradient")?
            .unwrap_or(GradientMode::Interpolated),
        out_dir: file.pick(args.out_dir, "out-dir")?,
        preset: Some(preset),
        ..RunOptions::default()
    };
    Ok(Resolved {
        preset,
        nonlinearity: file.pick(args.nonlinearity, "nonlinearity")?.unwrap_or_default(),
        options,
    })
}

fn assemble(preset: Preset, nonlinearity: Nonlinearity) -> Result<Assembly, Failure> {
    Ok(Assembly::new(ProblemSpec {
        nonlinearity,
        ..ProblemSpec::new(preset)
    })?)
}

/// Prints a line, treating a closed stdout (e.g. piped into `head`) as done.
fn emit(line: &str) -> Result<(), Failure> {
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{line}") {
        Err(e) if e.kind() != ErrorKind::BrokenPipe => Err(Failure::Solver(e.into())),
        _ => Ok(()),
    }
}

fn print_summary(summary: &RunSummary) -> Result<(), Failure> {
    let json = serde_json::to_string_pretty(summary).map_err(switchopt::Error::from)?;
    emit(&json)
}

fn cmd_run(args: RunArgs, file: &ConfigFile) -> Result<(), Failure> {
    let mut keys = vec!["case", "tau0", "trajectory"];
    keys.extend(SOLVER_KEYS);
    file.check_keys(&keys)?;
    let case = file
        .pick(args.case, "case")?
        .ok_or_else(|| "missing --case".to_string())?;
    let tau0 = match args.tau0 {
        Some(raw) => Some(parse_vector(&raw).map_err(|e| format!("--tau0: {e}"))?),
        None => file.pick_vec(None, "tau0")?,
    }
    .ok_or_else(|| "missing --tau0".to_string())?;
    let trajectory = file.pick_flag(args.trajectory, "trajectory")?;
    let resolved = resolve_solver(args.solver, file)?;
    let options = RunOptions {
        write_trajectory: trajectory,
        ..resolved.options
    };
    let assembly = assemble(resolved.preset, resolved.nonlinearity)?;
    let outcome = run_case(&assembly, case, &tau0, &options)?;
    print_summary(&outcome.summary)
}

fn cmd_run_all(args: RunAllArgs, file: &ConfigFile) -> Result<(), Failure> {
    file.check_keys(&SOLVER_KEYS)?;
    let resolved = resolve_solver(args.solver, file)?;
    let assembly = assemble(resolved.preset, resolved.nonlinearity)?;
    let outcomes = run_all(&assembly, &resolved.options)?;
    emit("table case iterations objective   residual   stop             descent")?;
    for o in &outcomes {
        let s = &o.summary;
        emit(&format!(
            "{:>5} {:>4} {:>10} {:.4e} {:.4e} {:<16} {}",
            s.table.unwrap_or(0),
            s.case.name(),
            s.iterations,
            s.objective,
            s.residual,
            s.stop_reason.as_str(),
            if s.descent { "yes" } else { "no" }
        ))?;
    }
    Ok(())
}

fn cmd_project(args: ProjectArgs, file: &ConfigFile) -> Result<(), Failure> {
    file.check_keys(&["tau", "horizon"])?;
    let tau = match args.tau {
        Some(raw) => Some(parse_vector(&raw).map_err(|e| format!("--tau: {e}"))?),
        None => file.pick_vec(None, "tau")?,
    }
    .ok_or_else(|| "missing --tau".to_string())?;
    let horizon = file.pick(args.horizon, "horizon")?.unwrap_or(HORIZON);
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Failure::Config(format!("horizon must be positive, got {horizon}")));
    }
    let p = project(&tau, horizon);
    let text: Vec<String> = p.iter().map(|v| v.to_string()).collect();
    emit(&text.join(" "))?;
    Ok(())
}

fn cmd_check_gradient(args: CheckArgs, file: &ConfigFile) -> Result<(), Failure> {
    file.check_keys(&["seed", "count", "preset", "nonlinearity", "alpha"])?;
    let seed = file.pick(args.seed, "seed")?.unwrap_or(0);
    let count = file.pick(args.count, "count")?.unwrap_or(100);
    let preset = file.pick(args.preset, "preset")?.unwrap_or(Preset::Desk);
    let nonlinearity = file.pick(args.nonlinearity, "nonlinearity")?.unwrap_or_default();
    let alpha = file.pick(args.alpha, "alpha")?.unwrap_or(0.0);
    let assembly = assemble(preset, nonlinearity)?;
    let problem = assembly.problem(Case::I)?.with_alpha(alpha)?;
    let report = gradient_check(&problem, seed, count)?;
    let pass = report.max_relative_error <= GRADIENT_TOL;
    emit(&format!(
        "{} samples, step {FD_STEP:e}, f = {}, alpha = {alpha:e}: max relative error {:.3e} (component {} at {:?}) {}",
        report.samples,
        nonlinearity.name(),
        report.max_relative_error,
        report.worst_component + 1,
        report.worst_tau,
        if pass { "PASS" } else { "FAIL" }
    ))?;
    if pass {
        Ok(())
    } else {
        Err(Failure::Solver(switchopt::Error::InvalidParameter(format!(
            "gradient check exceeded {GRADIENT_TOL:e}"
        ))))
    }
}

fn cmd_demo_ode(args: OdeArgs, file: &ConfigFile) -> Result<(), Failure> {
    file.check_keys(&["psi1", "slope", "tau-bar"])?;
    let psi1 = file.pick(args.psi1, "psi1")?.unwrap_or(1.0);
    let slope = file.pick(args.slope, "slope")?.unwrap_or(1.0);
    let tau_bar = file.pick(args.tau_bar, "tau-bar")?.unwrap_or(0.5);
    let (left, right) = ode_counterexample(psi1, slope, tau_bar)?;
    emit(&format!("left derivative  {left}"))?;
    emit(&format!("right derivative {right}"))?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let file = match cli.config.as_deref().map(ConfigFile::load).transpose() {
        Ok(f) => f.unwrap_or_default(),
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(a, &file),
        Command::RunAll(a) => cmd_run_all(a, &file),
        Command::Project(a) => cmd_project(a, &file),
        Command::CheckGradient(a) => cmd_check_gradient(a, &file),
        Command::DemoOde(a) => cmd_demo_ode(a, &file),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Solver(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
