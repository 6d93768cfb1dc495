//! Semi-implicit Euler time stepping for `∂_t y − Δy + f(y) = rhs`, its
//! linearization and the exact discrete adjoint.
//!
//! Step `i` (slab `[t_{i-1}, t_i]`) solves
//!
//! ```text
//! (M/Δt + A) y_i = (M/Δt) y_{i-1} − M f(y_{i-1}) + s_i Mψ + b_i
//! ```
//!
//! where `s_i` is the hat-averaged switching control and `b_i` an already
//! mass-weighted load. The step matrix is constant, so it is factored once.

use std::io::Write;

use crate::error::{Error, Result};
use crate::mesh::TriMesh;
use crate::sparse::{BandedCholesky, CgSolver, CsrMatrix};

/// Uniform time mesh `t_i = T i / k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeMesh {
    horizon: f64,
    steps: usize,
}

impl TimeMesh {
    pub fn uniform(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "time horizon must be positive, got {horizon}"
            )));
        }
        if steps == 0 {
            return Err(Error::InvalidParameter("need at least one time step".into()));
        }
        Ok(Self { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Number of steps `k`.
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        if i == self.steps {
            self.horizon
        } else {
            self.horizon * i as f64 / self.steps as f64
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|i| self.time(i)).collect()
    }

    /// Slab `i = 1..=k`, i.e. `[t_{i-1}, t_i]`.
    pub fn slab(&self, i: usize) -> crate::control::Slab {
        debug_assert!((1..=self.steps).contains(&i));
        crate::control::Slab::new(self.time(i - 1), self.time(i))
    }

    pub fn slabs(&self) -> impl Iterator<Item = crate::control::Slab> + '_ {
        (1..=self.steps).map(|i| self.slab(i))
    }
}

/// Pointwise reaction term `f`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Nonlinearity {
    #[default]
    Zero,
    Sin,
    Arctan,
}

impl Nonlinearity {
    pub const ALL: [Nonlinearity; 3] = [Nonlinearity::Zero, Nonlinearity::Sin, Nonlinearity::Arctan];

    pub fn value(self, y: f64) -> f64 {
        match self {
            Nonlinearity::Zero => 0.0,
            Nonlinearity::Sin => y.sin(),
            Nonlinearity::Arctan => y.atan(),
        }
    }

    pub fn derivative(self, y: f64) -> f64 {
        match self {
            Nonlinearity::Zero => 0.0,
            Nonlinearity::Sin => y.cos(),
            Nonlinearity::Arctan => 1.0 / (1.0 + y * y),
        }
    }

    pub fn is_zero(self) -> bool {
        self == Nonlinearity::Zero
    }

    pub fn name(self) -> &'static str {
        match self {
            Nonlinearity::Zero => "zero",
            Nonlinearity::Sin => "sin",
            Nonlinearity::Arctan => "arctan",
        }
    }
}

impl std::str::FromStr for Nonlinearity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "zero" | "none" | "0" => Ok(Nonlinearity::Zero),
            "sin" => Ok(Nonlinearity::Sin),
            "arctan" | "atan" => Ok(Nonlinearity::Arctan),
            other => Err(Error::InvalidParameter(format!("unknown nonlinearity '{other}'"))),
        }
    }
}

/// Nodal coefficient vectors at the time nodes `t_0, …, t_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub values: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn zeros(steps: usize, dofs: usize) -> Self {
        Self {
            values: vec![vec![0.0; dofs]; steps + 1],
        }
    }

    pub fn steps(&self) -> usize {
        self.values.len() - 1
    }

    /// One line per time node, space-separated nodal values.
    pub fn write_text<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for v in &self.values {
            let line: Vec<String> = v.iter().map(|x| format!("{x:e}")).collect();
            writeln!(out, "{}", line.join(" "))?;
        }
        Ok(())
    }
}

enum StepSolver {
    Cholesky(BandedCholesky),
    Cg(CgSolver),
}

/// Linear solver used for the constant step matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Backend {
    BandedCholesky,
    ConjugateGradient { rel_tol: f64 },
}

/// Assembled spatial operators and the factored step matrix.
pub struct HeatSystem {
    mass: CsrMatrix,
    stiffness: CsrMatrix,
    step_matrix: CsrMatrix,
    solver: StepSolver,
    time: TimeMesh,
    nonlinearity: Nonlinearity,
}

impl std::fmt::Debug for HeatSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HeatSystem")
            .field("dofs", &self.dofs())
            .field("time", &self.time)
            .field("nonlinearity", &self.nonlinearity)
            .finish()
    }
}

impl HeatSystem {
    pub fn new(mesh: &TriMesh, time: TimeMesh, nonlinearity: Nonlinearity) -> Result<Self> {
        Self::with_backend(mesh, time, nonlinearity, Backend::BandedCholesky)
    }

    pub fn with_backend(
        mesh: &TriMesh,
        time: TimeMesh,
        nonlinearity: Nonlinearity,
        backend: Backend,
    ) -> Result<Self> {
        let (mass, stiffness) = mesh.assemble()?;
        Self::from_matrices(mass, stiffness, time, nonlinearity, backend)
    }

    pub fn from_matrices(
        mass: CsrMatrix,
        stiffness: CsrMatrix,
        time: TimeMesh,
        nonlinearity: Nonlinearity,
        backend: Backend,
    ) -> Result<Self> {
        let step_matrix = mass.linear_combination(1.0 / time.dt(), &stiffness, 1.0)?;
        let solver = match backend {
            Backend::BandedCholesky => StepSolver::Cholesky(BandedCholesky::factor(&step_matrix)?),
            Backend::ConjugateGradient { rel_tol } => {
                StepSolver::Cg(CgSolver::new(&step_matrix, rel_tol)?)
            }
        };
        Ok(Self {
            mass,
            stiffness,
            step_matrix,
            solver,
            time,
            nonlinearity,
        })
    }

    pub fn dofs(&self) -> usize {
        self.mass.n_rows()
    }

    pub fn mass(&self) -> &CsrMatrix {
        &self.mass
    }

    pub fn stiffness(&self) -> &CsrMatrix {
        &self.stiffness
    }

    pub fn step_matrix(&self) -> &CsrMatrix {
        &self.step_matrix
    }

    pub fn time(&self) -> &TimeMesh {
        &self.time
    }

    pub fn nonlinearity(&self) -> Nonlinearity {
        self.nonlinearity
    }

    /// Solves `(M/Δt + A) x = b` in place; `x` holds the initial guess for CG.
    fn solve_step(&self, b: &[f64], x: &mut [f64]) -> Result<()> {
        match &self.solver {
            StepSolver::Cholesky(c) => {
                x.copy_from_slice(b);
                c.solve_in_place(x);
            }
            StepSolver::Cg(cg) => {
                cg.solve_into(&self.step_matrix, b, x)?;
            }
        }
        Ok(())
    }

    fn check_dofs(&self, context: &'static str, v: &[f64]) -> Result<()> {
        if v.len() != self.dofs() {
            return Err(Error::DimensionMismatch {
                context,
                expected: self.dofs(),
                found: v.len(),
            });
        }
        Ok(())
    }

    fn check_slab_vectors(&self, context: &'static str, vs: &[Vec<f64>]) -> Result<()> {
        if vs.len() != self.time.steps() {
            return Err(Error::DimensionMismatch {
                context,
                expected: self.time.steps(),
                found: vs.len(),
            });
        }
        vs.iter().try_for_each(|v| self.check_dofs(context, v))
    }

    /// Runs the scheme for slab weights `s_i`, control profile `Mψ` and
    /// mass-weighted loads `b_i` (empty slice for none).
    pub fn forward_solve(
        &self,
        y0: &[f64],
        weights: &[f64],
        m_psi: &[f64],
        loads: &[Vec<f64>],
    ) -> Result<Trajectory> {
        let k = self.time.steps();
        let n = self.dofs();
        self.check_dofs("initial state", y0)?;
        self.check_dofs("control profile", m_psi)?;
        if weights.len() != k {
            return Err(Error::DimensionMismatch {
                context: "slab weights",
                expected: k,
                found: weights.len(),
            });
        }
        if !loads.is_empty() {
            self.check_slab_vectors("slab loads", loads)?;
        }
        let inv_dt = 1.0 / self.time.dt();
        let mut values = Vec::with_capacity(k + 1);
        values.push(y0.to_vec());
        let mut rhs = vec![0.0; n];
        let mut work = vec![0.0; n];
        for i in 1..=k {
            let prev = &values[i - 1];
            if self.nonlinearity.is_zero() {
                self.mass.spmv_unchecked(prev, &mut rhs);
                rhs.iter_mut().for_each(|r| *r *= inv_dt);
            } else {
                for (w, &y) in work.iter_mut().zip(prev) {
                    *w = y * inv_dt - self.nonlinearity.value(y);
                }
                self.mass.spmv_unchecked(&work, &mut rhs);
            }
            let s = weights[i - 1];
            if s != 0.0 {
                rhs.iter_mut().zip(m_psi).for_each(|(r, &p)| *r += s * p);
            }
            if let Some(b) = loads.get(i - 1) {
                rhs.iter_mut().zip(b).for_each(|(r, &v)| *r += v);
            }
            let mut next = prev.clone();
            self.solve_step(&rhs, &mut next)?;
            values.push(next);
        }
        Ok(Trajectory { values })
    }

    /// Derivative of the trajectory in the direction of slab perturbations
    /// `h_i` added to the right-hand side of step `i`; `δy_0 = 0`.
    pub fn linearized_forward(&self, state: &Trajectory, h: &[Vec<f64>]) -> Result<Trajectory> {
        let k = self.time.steps();
        let n = self.dofs();
        self.check_trajectory("state", state)?;
        self.check_slab_vectors("perturbations", h)?;
        let inv_dt = 1.0 / self.time.dt();
        let mut values = Vec::with_capacity(k + 1);
        values.push(vec![0.0; n]);
        let mut rhs = vec![0.0; n];
        let mut work = vec![0.0; n];
        for i in 1..=k {
            let prev: &Vec<f64> = &values[i - 1];
            let y = &state.values[i - 1];
            for ((w, &d), &yv) in work.iter_mut().zip(prev).zip(y) {
                *w = d * inv_dt - self.nonlinearity.derivative(yv) * d;
            }
            self.mass.spmv_unchecked(&work, &mut rhs);
            rhs.iter_mut().zip(&h[i - 1]).for_each(|(r, &v)| *r += v);
            let mut next = prev.clone();
            self.solve_step(&rhs, &mut next)?;
            values.push(next);
        }
        Ok(Trajectory { values })
    }

    /// Backward recursion transposed to [`Self::linearized_forward`].
    ///
    /// `residual_weights[j-1]` is the derivative of the objective with
    /// respect to `y_j`, `j = 1..=k`. With `λ_{k+1} = 0` the multipliers solve
    /// `K λ_j = g_j + (M/Δt) λ_{j+1} − f'(y_j) ∘ (M λ_{j+1})`, and the returned
    /// trajectory stores `p_{j-1} = λ_j / Δt` with `p_k = 0`.
    pub fn adjoint_solve(&self, state: &Trajectory, residual_weights: &[Vec<f64>]) -> Result<Trajectory> {
        let k = self.time.steps();
        let n = self.dofs();
        self.check_trajectory("state", state)?;
        self.check_slab_vectors("residual weights", residual_weights)?;
        let dt = self.time.dt();
        let inv_dt = 1.0 / dt;
        let mut lambdas: Vec<Vec<f64>> = vec![Vec::new(); k + 2];
        lambdas[k + 1] = vec![0.0; n];
        let mut m_next = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        for j in (1..=k).rev() {
            let next = &lambdas[j + 1];
            self.mass.spmv_unchecked(next, &mut m_next);
            let y = &state.values[j];
            for (((r, &g), &ml), &yv) in rhs.iter_mut().zip(&residual_weights[j - 1]).zip(&m_next).zip(y) {
                *r = g + ml * inv_dt - self.nonlinearity.derivative(yv) * ml;
            }
            let mut lam = next.clone();
            self.solve_step(&rhs, &mut lam)?;
            lambdas[j] = lam;
        }
        let mut values: Vec<Vec<f64>> = lambdas
            .into_iter()
            .skip(1)
            .take(k)
            .map(|mut l| {
                l.iter_mut().for_each(|v| *v *= inv_dt);
                l
            })
            .collect();
        values.push(vec![0.0; n]);
        Ok(Trajectory { values })
    }

    fn check_trajectory(&self, context: &'static str, t: &Trajectory) -> Result<()> {
        if t.values.len() != self.time.steps() + 1 {
            return Err(Error::DimensionMismatch {
                context,
                expected: self.time.steps() + 1,
                found: t.values.len(),
            });
        }
        t.values.iter().try_for_each(|v| self.check_dofs(context, v))
    }

    /// Piecewise-linear interpolant of `p` at `t` clamped to `[0, T]`.
    pub fn evaluate_adjoint_at(&self, p: &Trajectory, t: f64) -> Vec<f64> {
        evaluate_at(&self.time, p, t)
    }
}

/// Piecewise-linear interpolant of a trajectory at `t` clamped to `[0, T]`.
pub fn evaluate_at(time: &TimeMesh, p: &Trajectory, t: f64) -> Vec<f64> {
    let k = time.steps();
    let t = t.clamp(0.0, time.horizon());
    let pos = t / time.dt();
    let i = (pos.floor() as usize).min(k - 1);
    let theta = (pos - i as f64).clamp(0.0, 1.0);
    if theta == 0.0 {
        return p.values[i].clone();
    }
    if theta == 1.0 {
        return p.values[i + 1].clone();
    }
    p.values[i]
        .iter()
        .zip(&p.values[i + 1])
        .map(|(a, b)| (1.0 - theta) * a + theta * b)
        .collect()
}
