//! Manufactured test problems on the unit square and the driver that runs
//! the optimizer on them.
//!
//! The desired state is `y_d(t, x) = t² sin(πx₁) sin(πx₂)` and the control
//! profile a Gaussian bump centered in the square. A known switching pattern
//! `τ_opt` is made optimal with objective value zero by adding a forcing
//! term, either to the continuous equation (the discrete optimum is then
//! only close to `τ_opt`) or directly to the time-stepping scheme.

use std::f64::consts::PI;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control::{slab_weight, FormPattern};
use crate::error::{Error, Result};
use crate::mesh::TriMesh;
use crate::objective::{GradientMode, Problem};
use crate::optimizer::{optimize, write_history_csv, OptimizeResult, OptimizerConfig, StopReason};
use crate::parabolic::{HeatSystem, Nonlinearity, TimeMesh, Trajectory};
use crate::projection::project;

pub const HORIZON: f64 = 1.0;

pub const TAU_OPT: [f64; 10] = [0.0, 0.1, 0.15, 0.25, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85];

/// The five starting points used for every case, in table order.
pub const INITIAL_POINTS: [[f64; 10]; 5] = [
    [0.05, 0.1, 0.15, 0.25, 0.4, 0.55, 0.65, 0.85, 0.9, 1.0],
    [0.0, 0.1, 0.15, 0.2, 0.55, 0.55, 0.65, 0.85, 0.9, 0.9],
    [0.05, 0.15, 0.15, 0.25, 0.55, 0.6, 0.7, 0.75, 0.8, 0.9],
    [0.05, 0.15, 0.25, 0.3, 0.45, 0.6, 0.7, 0.75, 0.9, 1.0],
    [0.05, 0.15, 0.25, 0.45, 0.6, 0.65, 0.7, 0.75, 0.9, 0.9],
];

pub const SCHEMA_VERSION: u32 = 1;

/// Mesh resolution: nodes per direction and number of time steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// `nx = 20`, `k = 250`.
    Desk,
    /// `nx = 40`, `k = 1000`.
    Fine,
}

impl Preset {
    pub fn nx(self) -> usize {
        match self {
            Preset::Desk => 20,
            Preset::Fine => 40,
        }
    }

    pub fn steps(self) -> usize {
        match self {
            Preset::Desk => 250,
            Preset::Fine => 1000,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::Desk => "desk",
            Preset::Fine => "fine",
        }
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "desk" => Ok(Preset::Desk),
            "fine" => Ok(Preset::Fine),
            other => Err(Error::InvalidParameter(format!("unknown preset '{other}'"))),
        }
    }
}

/// Where the manufactured solution is exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExactSolution {
    FunctionSpace,
    Discretized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Case {
    I,
    Ii,
    Iii,
    Iv,
}

impl Case {
    pub const ALL: [Case; 4] = [Case::I, Case::Ii, Case::Iii, Case::Iv];

    pub fn alpha(self) -> f64 {
        match self {
            Case::I | Case::Ii => 0.0,
            Case::Iii | Case::Iv => 1e-6,
        }
    }

    pub fn exact_solution(self) -> ExactSolution {
        match self {
            Case::I | Case::Iii => ExactSolution::FunctionSpace,
            Case::Ii | Case::Iv => ExactSolution::Discretized,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Case::I => 0,
            Case::Ii => 1,
            Case::Iii => 2,
            Case::Iv => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Case::I => "i",
            Case::Ii => "ii",
            Case::Iii => "iii",
            Case::Iv => "iv",
        }
    }

    /// Table number of the run with starting point `point` (0-based).
    pub fn table(self, point: usize) -> usize {
        5 * self.index() + point + 1
    }
}

impl FromStr for Case {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "i" | "1" => Ok(Case::I),
            "ii" | "2" => Ok(Case::Ii),
            "iii" | "3" => Ok(Case::Iii),
            "iv" | "4" => Ok(Case::Iv),
            other => Err(Error::InvalidParameter(format!("unknown case '{other}'"))),
        }
    }
}

pub fn sine_mode(x1: f64, x2: f64) -> f64 {
    (PI * x1).sin() * (PI * x2).sin()
}

pub fn bump(x1: f64, x2: f64) -> f64 {
    10.0 * (-2.0 * ((x1 - 0.5).powi(2) + (x2 - 0.5).powi(2))).exp()
}

/// Problem data shared by all cases at one resolution.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub nx: usize,
    pub steps: usize,
    pub tau_opt: Vec<f64>,
    pub nonlinearity: Nonlinearity,
}

impl ProblemSpec {
    pub fn new(preset: Preset) -> Self {
        Self {
            nx: preset.nx(),
            steps: preset.steps(),
            tau_opt: TAU_OPT.to_vec(),
            nonlinearity: Nonlinearity::Zero,
        }
    }
}

/// Assembled operators and both manufactured forcings for one spec.
#[derive(Debug)]
pub struct Assembly {
    spec: ProblemSpec,
    mesh: TriMesh,
    system: Arc<HeatSystem>,
    psi: Vec<f64>,
    desired: Arc<Trajectory>,
    continuous: Arc<Vec<Vec<f64>>>,
    discrete: Arc<Vec<Vec<f64>>>,
}

impl Assembly {
    pub fn new(spec: ProblemSpec) -> Result<Self> {
        let mesh = TriMesh::new(spec.nx)?;
        let time = TimeMesh::uniform(HORIZON, spec.steps)?;
        let system = Arc::new(HeatSystem::new(&mesh, time, spec.nonlinearity)?);
        let psi = mesh.interpolate(bump);
        let sine = mesh.interpolate(sine_mode);
        let desired = Trajectory {
            values: time
                .times()
                .iter()
                .map(|&t| sine.iter().map(|s| t * t * s).collect())
                .collect(),
        };
        let pattern = FormPattern::alternating(spec.tau_opt.len(), psi.clone())?;
        let continuous = build_forcing_continuous(&system, &pattern, &spec.tau_opt, &sine)?;
        let discrete = build_forcing_discrete(&system, &pattern, &spec.tau_opt, &desired)?;
        Ok(Self {
            spec,
            mesh,
            system,
            psi,
            desired: Arc::new(desired),
            continuous: Arc::new(continuous),
            discrete: Arc::new(discrete),
        })
    }

    pub fn preset(preset: Preset) -> Result<Self> {
        Self::new(ProblemSpec::new(preset))
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn mesh(&self) -> &TriMesh {
        &self.mesh
    }

    pub fn system(&self) -> &Arc<HeatSystem> {
        &self.system
    }

    pub fn problem(&self, case: Case) -> Result<Problem> {
        let loads = match case.exact_solution() {
            ExactSolution::FunctionSpace => self.continuous.clone(),
            ExactSolution::Discretized => self.discrete.clone(),
        };
        Problem::new(
            self.system.clone(),
            FormPattern::alternating(self.spec.tau_opt.len(), self.psi.clone())?,
            vec![0.0; self.mesh.n_interior()],
            self.desired.clone(),
            loads,
            case.alpha(),
            self.spec.tau_opt.clone(),
        )
    }
}

/// Hat averages of `w = ∂_t y_d − Δy_d − c_opt(t) ψ` per slab, mass-weighted.
///
/// With `y_d = t² S(x)` and `−ΔS = 2π² S` the time dependence is a
/// polynomial, whose hat moments are exact, plus the switching control,
/// whose hat average is the slab weight.
pub fn build_forcing_continuous(
    system: &HeatSystem,
    pattern: &FormPattern,
    tau_opt: &[f64],
    sine: &[f64],
) -> Result<Vec<Vec<f64>>> {
    pattern.check_len(tau_opt)?;
    let psi = pattern.psi();
    system
        .time()
        .slabs()
        .map(|slab| {
            let mass = slab.hat_mass();
            let a = (2.0 * slab.hat_first_moment() + 2.0 * PI * PI * slab.hat_second_moment()) / mass;
            let s = slab_weight(tau_opt, pattern, &slab);
            let w: Vec<f64> = sine.iter().zip(psi).map(|(&sv, &pv)| a * sv - s * pv).collect();
            system.mass().spmv(&w)
        })
        .collect()
}

/// Loads that make the scheme reproduce `y_d` at every node for `τ_opt`:
/// `b_i = K y_d,i − (M/Δt) y_d,i−1 + M f(y_d,i−1) − s_i(τ_opt) Mψ`.
pub fn build_forcing_discrete(
    system: &HeatSystem,
    pattern: &FormPattern,
    tau_opt: &[f64],
    desired: &Trajectory,
) -> Result<Vec<Vec<f64>>> {
    pattern.check_len(tau_opt)?;
    let inv_dt = 1.0 / system.time().dt();
    let f = system.nonlinearity();
    let m_psi = system.mass().spmv(pattern.psi())?;
    system
        .time()
        .slabs()
        .enumerate()
        .map(|(idx, slab)| {
            let (prev, next) = (&desired.values[idx], &desired.values[idx + 1]);
            let k_next = system.step_matrix().spmv(next)?;
            let shifted: Vec<f64> = prev.iter().map(|&y| y * inv_dt - f.value(y)).collect();
            let m_prev = system.mass().spmv(&shifted)?;
            let s = slab_weight(tau_opt, pattern, &slab);
            Ok(k_next
                .iter()
                .zip(&m_prev)
                .zip(&m_psi)
                .map(|((a, b), p)| a - b - s * p)
                .collect())
        })
        .collect()
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub schema: u32,
    pub case: Case,
    pub preset: Option<Preset>,
    pub table: Option<usize>,
    pub tau0: Vec<f64>,
    pub final_tau: Vec<f64>,
    pub objective: f64,
    pub residual: f64,
    pub stop_reason: StopReason,
    pub iterations: usize,
    pub descent: bool,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub summary: RunSummary,
    pub result: OptimizeResult,
}

/// Settings for a single optimization run.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub optimizer: OptimizerConfig,
    pub gradient: GradientMode,
    pub out_dir: Option<PathBuf>,
    pub write_trajectory: bool,
    pub preset: Option<Preset>,
    pub table: Option<usize>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            optimizer: OptimizerConfig::default(),
            gradient: GradientMode::Interpolated,
            out_dir: None,
            write_trajectory: false,
            preset: None,
            table: None,
        }
    }
}

/// Projects `tau0`, optimizes and writes the run artifacts if requested.
pub fn run_case(assembly: &Assembly, case: Case, tau0: &[f64], options: &RunOptions) -> Result<RunOutcome> {
    let n = assembly.spec().tau_opt.len();
    if tau0.len() != n {
        return Err(Error::DimensionMismatch {
            context: "initial switching times",
            expected: n,
            found: tau0.len(),
        });
    }
    let problem = assembly.problem(case)?.with_gradient_mode(options.gradient);
    let start = Instant::now();
    let tau_start = project(tau0, HORIZON);
    let result = optimize(&tau_start, &problem, &options.optimizer)?;
    let summary = RunSummary {
        schema: SCHEMA_VERSION,
        case,
        preset: options.preset,
        table: options.table,
        tau0: tau0.to_vec(),
        final_tau: result.tau.clone(),
        objective: result.objective,
        residual: result.residual,
        stop_reason: result.stop_reason,
        iterations: result.iterations(),
        descent: crate::optimizer::check_descent(&result.history),
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    if let Some(dir) = &options.out_dir {
        write_artifacts(dir, &summary, &result)?;
        if options.write_trajectory {
            let y = problem.state(&result.tau)?;
            y.write_text(BufWriter::new(File::create(dir.join("trajectory.txt"))?))?;
        }
    }
    Ok(RunOutcome { summary, result })
}

pub fn write_artifacts(dir: &Path, summary: &RunSummary, result: &OptimizeResult) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_history_csv(&result.history, BufWriter::new(File::create(dir.join("history.csv"))?))?;
    let json = serde_json::to_string_pretty(summary)?;
    std::fs::write(dir.join("summary.json"), json + "\n")?;
    Ok(())
}

/// All four cases from all five starting points, one output directory per
/// table (`table_01` … `table_20`) when `out_dir` is set.
pub fn run_all(assembly: &Assembly, options: &RunOptions) -> Result<Vec<RunOutcome>> {
    let jobs: Vec<(Case, usize)> = Case::ALL
        .iter()
        .flat_map(|&c| (0..INITIAL_POINTS.len()).map(move |p| (c, p)))
        .collect();
    jobs.par_iter()
        .map(|&(case, point)| {
            let table = case.table(point);
            let opts = RunOptions {
                out_dir: options.out_dir.as_ref().map(|d| d.join(format!("table_{table:02}"))),
                table: Some(table),
                ..options.clone()
            };
            run_case(assembly, case, &INITIAL_POINTS[point], &opts)
        })
        .collect()
}

/// Sorted switching times in `(margin, T − margin)` whose components all
/// keep a distance `margin` from the time nodes and slab midpoints.
pub fn sample_interior_tau<R: Rng>(rng: &mut R, n: usize, time: &TimeMesh, margin: f64) -> Vec<f64> {
    let half = 0.5 * time.dt();
    loop {
        let mut tau: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..time.horizon())).collect();
        tau.sort_by(f64::total_cmp);
        let clear = tau.iter().all(|&t| {
            let s = t / half;
            (s - s.round()).abs() * half > margin
        });
        if clear {
            return tau;
        }
    }
}

/// Worst componentwise disagreement between the gradient and central
/// differences over random interior switching times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientCheck {
    pub samples: usize,
    pub max_relative_error: f64,
    pub worst_tau: Vec<f64>,
    pub worst_component: usize,
}

pub const FD_STEP: f64 = 1e-6;

/// `|g_j − fd_j| / max(|g_j|, |fd_j|)`, zero when both are below `1e-12`.
pub fn relative_error(g: f64, fd: f64) -> f64 {
    let scale = g.abs().max(fd.abs());
    if scale < 1e-12 {
        0.0
    } else {
        (g - fd).abs() / scale
    }
}

pub fn gradient_check(problem: &Problem, seed: u64, count: usize) -> Result<GradientCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let time = *problem.system().time();
    let mut report = GradientCheck {
        samples: count,
        max_relative_error: 0.0,
        worst_tau: Vec::new(),
        worst_component: 0,
    };
    for _ in 0..count {
        let tau = sample_interior_tau(&mut rng, problem.n(), &time, 10.0 * FD_STEP);
        let g = problem.gradient(&tau)?;
        let fd = problem.fd_gradient(&tau, FD_STEP)?;
        for (j, (&a, &b)) in g.iter().zip(&fd).enumerate() {
            let e = relative_error(a, b);
            if e > report.max_relative_error || report.worst_tau.is_empty() {
                report.max_relative_error = report.max_relative_error.max(e);
                report.worst_tau = tau.clone();
                report.worst_component = j;
            }
        }
    }
    Ok(report)
}

/// State of `y' = χ_{[τ₁,τ₂)} ψ₁`, `y(0) = 0`, at time `t`.
pub fn ode_state(tau1: f64, tau2: f64, psi1: f64, t: f64) -> f64 {
    if tau1 >= tau2 || t <= tau1 {
        0.0
    } else {
        psi1 * (t.min(tau2) - tau1)
    }
}

/// One-sided directional derivatives of `τ ↦ g(y(τ₂))`, `g(z) = slope·z`, at
/// `τ = (τ̄, τ̄)` in the directions `∓e₂`, returned as `(left, right)`.
///
/// Difference quotients on a shrinking step sequence, each Richardson
/// extrapolated; the finest extrapolated value is reported.
pub fn ode_counterexample(psi1: f64, slope: f64, tau_bar: f64) -> Result<(f64, f64)> {
    if !(tau_bar > 0.0 && tau_bar < HORIZON) {
        return Err(Error::InvalidParameter(format!(
            "tau_bar must lie in (0, {HORIZON}), got {tau_bar}"
        )));
    }
    let objective = |t1: f64, t2: f64| slope * ode_state(t1, t2, psi1, t2);
    let base = objective(tau_bar, tau_bar);
    let max_step = 0.5 * tau_bar.min(HORIZON - tau_bar);
    let quotient = |eps: f64, sign: f64| {
        let shifted = objective(tau_bar, tau_bar + sign * eps);
        sign * (shifted - base) / eps
    };
    let limit = |sign: f64| {
        let mut eps = max_step;
        let mut extrapolated = 0.0;
        for _ in 0..12 {
            let coarse = quotient(eps, sign);
            let fine = quotient(0.5 * eps, sign);
            extrapolated = 2.0 * fine - coarse;
            eps *= 0.5;
        }
        extrapolated
    };
    Ok((limit(-1.0), limit(1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::control_scalar;
    use crate::sparse::solve_spd;

    fn small(nx: usize, steps: usize) -> Assembly {
        Assembly::new(ProblemSpec {
            nx,
            steps,
            tau_opt: TAU_OPT.to_vec(),
            nonlinearity: Nonlinearity::Zero,
        })
        .unwrap()
    }

    #[test]
    fn cases_and_tables() {
        assert_eq!(Case::I.alpha(), 0.0);
        assert_eq!(Case::Iv.alpha(), 1e-6);
        assert_eq!(Case::Iii.exact_solution(), ExactSolution::FunctionSpace);
        assert_eq!(Case::Ii.table(2), 8);
        assert_eq!(Case::I.table(0), 1);
        assert_eq!(Case::Iv.table(4), 20);
        assert_eq!("III".parse::<Case>().unwrap(), Case::Iii);
        assert!("v".parse::<Case>().is_err());
        assert_eq!("fine".parse::<Preset>().unwrap(), Preset::Fine);
    }

    #[test]
    fn optimal_control_starts_on() {
        let p = FormPattern::alternating(10, vec![1.0]).unwrap();
        assert_eq!(control_scalar(&TAU_OPT, &p, 0.05), 1.0);
        assert_eq!(control_scalar(&TAU_OPT, &p, 0.12), 0.0);
        assert_eq!(control_scalar(&TAU_OPT, &p, 0.9), 0.0);
    }

    #[test]
    fn discrete_forcing_reproduces_the_desired_state() {
        let a = small(8, 40);
        let problem = a.problem(Case::Ii).unwrap();
        let y = problem.state(&TAU_OPT).unwrap();
        for (yi, di) in y.values.iter().zip(&problem.desired().values) {
            for (u, v) in yi.iter().zip(di) {
                assert!((u - v).abs() < 1e-12);
            }
        }
        assert!(problem.objective(&TAU_OPT).unwrap() < 1e-20);
        let g = problem.gradient(&TAU_OPT).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn discrete_forcing_with_nonlinearity() {
        let a = Assembly::new(ProblemSpec {
            nx: 7,
            steps: 30,
            tau_opt: TAU_OPT.to_vec(),
            nonlinearity: Nonlinearity::Sin,
        })
        .unwrap();
        let problem = a.problem(Case::Iv).unwrap();
        assert!(problem.objective(&TAU_OPT).unwrap() < 1e-20);
    }

    #[test]
    fn continuous_forcing_first_slab_is_the_negative_control() {
        // the polynomial part of w is O(Δt) on the first slab
        let a = small(6, 1000);
        let load = &a.continuous[0];
        let m_psi = a.system.mass().spmv(&a.psi).unwrap();
        for (l, p) in load.iter().zip(&m_psi) {
            assert!((l + p).abs() < 0.01 * p.abs());
        }
    }

    #[test]
    fn continuous_forcing_error_decreases_under_refinement() {
        let value = |nx, steps| {
            let a = small(nx, steps);
            a.problem(Case::I).unwrap().objective(&TAU_OPT).unwrap()
        };
        let coarse = value(8, 50);
        let fine = value(15, 200);
        assert!(fine < coarse, "{coarse} -> {fine}");
    }

    #[test]
    fn continuous_forcing_matches_quadrature() {
        // hat-average of the polynomial part against composite Simpson
        let a = small(5, 20);
        let sine = a.mesh.interpolate(sine_mode);
        let time = *a.system.time();
        let slab = time.slab(7);
        let h = slab.width() / 200.0;
        let mut acc = 0.0;
        for q in 0..200 {
            let t0 = slab.start + q as f64 * h;
            let g = |t: f64| (2.0 * t + 2.0 * PI * PI * t * t) * slab.hat(t);
            acc += h / 6.0 * (g(t0) + 4.0 * g(t0 + 0.5 * h) + g(t0 + h));
        }
        let avg = acc / slab.hat_mass();
        let pattern = FormPattern::alternating(10, a.psi.clone()).unwrap();
        let s = slab_weight(&TAU_OPT, &pattern, &slab);
        let w: Vec<f64> = sine.iter().zip(&a.psi).map(|(x, p)| avg * x - s * p).collect();
        let expected = a.system.mass().spmv(&w).unwrap();
        for (u, v) in a.continuous[6].iter().zip(&expected) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn poisson_second_order() {
        let err = |nx| {
            let mesh = TriMesh::new(nx).unwrap();
            let (m, a) = mesh.assemble().unwrap();
            let f = mesh.interpolate(|x, y| 2.0 * PI * PI * sine_mode(x, y));
            let u = solve_spd(&a, &m.spmv(&f).unwrap(), 1e-13).unwrap();
            let exact = mesh.interpolate(sine_mode);
            u.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        };
        let ratio = err(20) / err(40);
        assert!((3.5..=4.5).contains(&ratio), "{ratio}");
    }

    #[test]
    fn sampled_times_avoid_kinks() {
        let time = TimeMesh::uniform(1.0, 50).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let tau = sample_interior_tau(&mut rng, 10, &time, 1e-4);
            assert!(crate::control::is_feasible(&tau, 1.0));
            for t in tau {
                let s = t / 0.01;
                assert!((s - s.round()).abs() * 0.01 > 1e-4);
            }
        }
    }

    #[test]
    fn gradient_check_on_small_problem() {
        let a = small(7, 30);
        let p = a.problem(Case::Iii).unwrap();
        let report = gradient_check(&p, 3, 4).unwrap();
        assert_eq!(report.samples, 4);
        assert!(report.max_relative_error < 1e-5, "{report:?}");
        assert_eq!(relative_error(0.0, 1e-13), 0.0);
        assert_eq!(relative_error(1.0, 0.5), 0.5);
    }

    #[test]
    fn ode_examples() {
        let (l, r) = ode_counterexample(1.0, 1.0, 0.5).unwrap();
        assert!(l.abs() < 1e-12 && (r - 1.0).abs() < 1e-12);
        assert_eq!(ode_counterexample(0.0, 1.0, 0.5).unwrap(), (0.0, 0.0));
        let (l, r) = ode_counterexample(2.0, 3.0, 0.3).unwrap();
        assert!(l.abs() < 1e-12 && (r - 6.0).abs() < 1e-10);
        assert!(ode_counterexample(1.0, 1.0, 1.0).is_err());
        assert_eq!(ode_state(0.6, 0.4, 1.0, 0.5), 0.0);
        assert_eq!(ode_state(0.2, 0.4, 2.0, 0.3), 2.0 * (0.3 - 0.2));
    }

    #[test]
    fn run_case_writes_artifacts() {
        let a = small(6, 20);
        let dir = tempfile::tempdir().unwrap();
        let options = RunOptions {
            optimizer: OptimizerConfig {
                max_iters: 3,
                ..OptimizerConfig::default()
            },
            gradient: GradientMode::Interpolated,
            out_dir: Some(dir.path().to_path_buf()),
            write_trajectory: true,
            preset: None,
            table: Some(8),
        };
        let tau0 = [0.01, 0.12, 0.17, 0.27, 0.56, 0.61, 0.72, 0.76, 0.81, 0.93];
        let out = run_case(&a, Case::Ii, &tau0, &options).unwrap();
        assert!(out.result.history[0].residual > 0.0);
        let summary: RunSummary =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
        assert_eq!(summary, out.summary);
        assert_eq!(summary.schema, 1);
        let history = std::fs::read_to_string(dir.path().join("history.csv")).unwrap();
        assert_eq!(history.lines().count(), out.result.iterations() + 1);
        let traj = std::fs::read_to_string(dir.path().join("trajectory.txt")).unwrap();
        assert_eq!(traj.lines().count(), 21);
        assert!(run_case(&a, Case::Ii, &[0.1, 0.2], &options).unwrap_err().is_invalid_input());
    }
}
