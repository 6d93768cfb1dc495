//! Reduced tracking objective `𝒥(τ)` and its gradient.
//!
//! The tracking term is the squared space-time `L²` error of the
//! piecewise-linear-in-time interpolants of `y` and `y_d`, integrated exactly:
//!
//! ```text
//! ½ Σ_i (Δt/3)(e_{i-1}ᵀM e_{i-1} + e_{i-1}ᵀM e_i + e_iᵀM e_i),   e_i = y_i − y_d,i
//! ```
//!
//! plus `(α/2)‖τ − τ_d‖²`.

use std::sync::Arc;

use crate::control::{slab_weight, slab_weight_derivative, FormPattern};
use crate::error::{Error, Result};
use crate::optimizer::Objective;
use crate::parabolic::{HeatSystem, Trajectory};
use crate::projection::project;
use crate::sparse::{dot, norm2};

/// How the adjoint is paired with the switching-time derivative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GradientMode {
    /// Exact derivative of the discrete objective. It vanishes in a
    /// component whose switching time sits on a time node, because every hat
    /// is zero there.
    #[default]
    Discrete,
    /// `κ_j ⟨Mψ, p(τ_j)⟩` with the piecewise-linear adjoint interpolant.
    Interpolated,
}

impl std::str::FromStr for GradientMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "discrete" => Ok(GradientMode::Discrete),
            "interpolated" => Ok(GradientMode::Interpolated),
            other => Err(Error::InvalidParameter(format!("unknown gradient mode '{other}'"))),
        }
    }
}

/// Everything needed to evaluate `𝒥` for a given `τ`.
#[derive(Debug, Clone)]
pub struct Problem {
    system: Arc<HeatSystem>,
    pattern: FormPattern,
    m_psi: Vec<f64>,
    y0: Vec<f64>,
    desired: Arc<Trajectory>,
    loads: Arc<Vec<Vec<f64>>>,
    alpha: f64,
    tau_d: Vec<f64>,
    mode: GradientMode,
}

impl Problem {
    /// `loads` may be empty for an unforced problem.
    pub fn new(
        system: Arc<HeatSystem>,
        pattern: FormPattern,
        y0: Vec<f64>,
        desired: Arc<Trajectory>,
        loads: Arc<Vec<Vec<f64>>>,
        alpha: f64,
        tau_d: Vec<f64>,
    ) -> Result<Self> {
        let dofs = system.dofs();
        let steps = system.time().steps();
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "Tikhonov weight must be non-negative, got {alpha}"
            )));
        }
        let check = |context, found| {
            if found == dofs {
                Ok(())
            } else {
                Err(Error::DimensionMismatch {
                    context,
                    expected: dofs,
                    found,
                })
            }
        };
        check("control profile", pattern.psi().len())?;
        check("initial state", y0.len())?;
        if desired.values.len() != steps + 1 {
            return Err(Error::DimensionMismatch {
                context: "desired trajectory",
                expected: steps + 1,
                found: desired.values.len(),
            });
        }
        desired.values.iter().try_for_each(|v| check("desired trajectory", v.len()))?;
        if !loads.is_empty() && loads.len() != steps {
            return Err(Error::DimensionMismatch {
                context: "slab loads",
                expected: steps,
                found: loads.len(),
            });
        }
        pattern.check_len(&tau_d)?;
        let m_psi = system.mass().spmv(pattern.psi())?;
        Ok(Self {
            system,
            pattern,
            m_psi,
            y0,
            desired,
            loads,
            alpha,
            tau_d,
            mode: GradientMode::default(),
        })
    }

    pub fn system(&self) -> &HeatSystem {
        &self.system
    }

    pub fn pattern(&self) -> &FormPattern {
        &self.pattern
    }

    pub fn horizon(&self) -> f64 {
        self.system.time().horizon()
    }

    pub fn n(&self) -> usize {
        self.pattern.n()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn tau_d(&self) -> &[f64] {
        &self.tau_d
    }

    pub fn desired(&self) -> &Trajectory {
        &self.desired
    }

    pub fn with_alpha(mut self, alpha: f64) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "Tikhonov weight must be non-negative, got {alpha}"
            )));
        }
        self.alpha = alpha;
        Ok(self)
    }

    /// Gradient used when the problem is handed to the optimizer.
    pub fn with_gradient_mode(mut self, mode: GradientMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn gradient_mode(&self) -> GradientMode {
        self.mode
    }

    /// Hat-averaged control `s_i` for every slab.
    pub fn slab_weights(&self, tau: &[f64]) -> Vec<f64> {
        self.system
            .time()
            .slabs()
            .map(|slab| slab_weight(tau, &self.pattern, &slab))
            .collect()
    }

    pub fn state(&self, tau: &[f64]) -> Result<Trajectory> {
        self.pattern.check_len(tau)?;
        let w = self.slab_weights(tau);
        self.system.forward_solve(&self.y0, &w, &self.m_psi, &self.loads)
    }

    fn regularization(&self, tau: &[f64]) -> f64 {
        let sq: f64 = tau.iter().zip(&self.tau_d).map(|(a, b)| (a - b) * (a - b)).sum();
        0.5 * self.alpha * sq
    }

    /// Tracking term and the vectors `M e_i`, `i = 0..=k`.
    fn tracking(&self, y: &Trajectory) -> (f64, Vec<Vec<f64>>) {
        let mass = self.system.mass();
        let dt = self.system.time().dt();
        let mut me = Vec::with_capacity(y.values.len());
        let mut errors = Vec::with_capacity(y.values.len());
        for (yi, di) in y.values.iter().zip(&self.desired.values) {
            let e: Vec<f64> = yi.iter().zip(di).map(|(a, b)| a - b).collect();
            let mut m = vec![0.0; e.len()];
            mass.spmv_unchecked(&e, &mut m);
            errors.push(e);
            me.push(m);
        }
        let mut total = 0.0;
        for i in 1..errors.len() {
            total += dot(&errors[i - 1], &me[i - 1]) + dot(&errors[i - 1], &me[i]) + dot(&errors[i], &me[i]);
        }
        (0.5 * dt / 3.0 * total, me)
    }

    pub fn objective(&self, tau: &[f64]) -> Result<f64> {
        let y = self.state(tau)?;
        Ok(self.tracking(&y).0 + self.regularization(tau))
    }

    /// Objective value and the adjoint trajectory at `τ`.
    pub fn objective_and_adjoint(&self, tau: &[f64]) -> Result<(f64, Trajectory)> {
        let y = self.state(tau)?;
        let (track, me) = self.tracking(&y);
        let k = self.system.time().steps();
        let c = self.system.time().dt() / 6.0;
        let weights: Vec<Vec<f64>> = (1..=k)
            .map(|j| {
                me[j]
                    .iter()
                    .enumerate()
                    .map(|(d, &mj)| {
                        let next = if j < k { 2.0 * mj + me[j + 1][d] } else { 0.0 };
                        c * (next + me[j - 1][d] + 2.0 * mj)
                    })
                    .collect()
            })
            .collect();
        let p = self.system.adjoint_solve(&y, &weights)?;
        Ok((track + self.regularization(tau), p))
    }

    /// Exact derivative of [`Self::objective`].
    pub fn gradient(&self, tau: &[f64]) -> Result<Vec<f64>> {
        Ok(self.objective_and_gradient(tau, GradientMode::Discrete)?.1)
    }

    pub fn objective_and_gradient(&self, tau: &[f64], mode: GradientMode) -> Result<(f64, Vec<f64>)> {
        let (value, p) = self.objective_and_adjoint(tau)?;
        let grad = match mode {
            GradientMode::Discrete => self.discrete_gradient(tau, &p),
            GradientMode::Interpolated => self.assemble_gradient(tau, |t| {
                dot(&self.m_psi, &self.system.evaluate_adjoint_at(&p, t))
            }),
        };
        Ok((value, grad))
    }

    /// `Σ_i (λ_i · Mψ) ∂s_i/∂τ_j + α(τ − τ_d)_j` with `λ_i = Δt p_{i-1}`.
    fn discrete_gradient(&self, tau: &[f64], p: &Trajectory) -> Vec<f64> {
        let time = self.system.time();
        let dt = time.dt();
        let pairings: Vec<f64> = (0..time.steps()).map(|i| dt * dot(&self.m_psi, &p.values[i])).collect();
        (0..tau.len())
            .map(|j| {
                let pde: f64 = time
                    .slabs()
                    .zip(&pairings)
                    .map(|(slab, &q)| q * slab_weight_derivative(tau, &self.pattern, &slab, j))
                    .sum();
                pde + self.alpha * (tau[j] - self.tau_d[j])
            })
            .collect()
    }

    /// Gradient assembled componentwise as `κ_j π(τ_j) + α(τ − τ_d)_j`, where
    /// `κ_j` is the jump of the form-function multiplier at switch `j` and
    /// `π(t)` the pairing of `Mψ` with the adjoint at time `t`.
    pub fn assemble_gradient<F: Fn(f64) -> f64>(&self, tau: &[f64], pairing: F) -> Vec<f64> {
        (0..tau.len())
            .map(|j| {
                let kappa = self.pattern.switch_coefficient(j);
                let pde = if kappa == 0.0 { 0.0 } else { kappa * pairing(tau[j]) };
                pde + self.alpha * (tau[j] - self.tau_d[j])
            })
            .collect()
    }

    /// Central differences of the objective.
    pub fn fd_gradient(&self, tau: &[f64], step: f64) -> Result<Vec<f64>> {
        if step.is_nan() || step <= 0.0 {
            return Err(Error::InvalidParameter(format!("step must be positive, got {step}")));
        }
        let mut grad = Vec::with_capacity(tau.len());
        let mut work = tau.to_vec();
        for j in 0..tau.len() {
            work[j] = tau[j] + step;
            let plus = self.objective(&work)?;
            work[j] = tau[j] - step;
            let minus = self.objective(&work)?;
            work[j] = tau[j];
            grad.push((plus - minus) / (2.0 * step));
        }
        Ok(grad)
    }

    /// `‖Π(τ − ∇𝒥(τ)/L) − τ‖`.
    pub fn stationarity_residual(&self, tau: &[f64], l: f64, mode: GradientMode) -> Result<f64> {
        if l.is_nan() || l <= 0.0 {
            return Err(Error::InvalidParameter(format!("L must be positive, got {l}")));
        }
        let (_, g) = self.objective_and_gradient(tau, mode)?;
        Ok(stationarity_residual(tau, &g, l, self.horizon()))
    }
}

impl Objective for Problem {
    fn horizon(&self) -> f64 {
        Problem::horizon(self)
    }

    fn value(&self, tau: &[f64]) -> Result<f64> {
        self.objective(tau)
    }

    fn value_and_gradient(&self, tau: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.objective_and_gradient(tau, self.mode)
    }
}

/// `‖Π(τ − g/L) − τ‖` for a given gradient `g`.
pub fn stationarity_residual(tau: &[f64], g: &[f64], l: f64, horizon: f64) -> f64 {
    let trial: Vec<f64> = tau.iter().zip(g).map(|(t, gi)| t - gi / l).collect();
    let p = project(&trial, horizon);
    let diff: Vec<f64> = p.iter().zip(tau).map(|(a, b)| a - b).collect();
    norm2(&diff)
}
