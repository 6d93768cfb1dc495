//! Projected gradient method with doubling backtracking.
//!
//! Each outer iteration takes `τ_{k+1} = Π(τ_k − ∇𝒥(τ_k)/L)` where `L` starts
//! at `L_init` and doubles until the sufficient-decrease test
//! `𝒥(τ_k) − 𝒥(τ_{k+1}) ≥ γ L ‖τ_k − τ_{k+1}‖²` holds.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::control::is_feasible;
use crate::error::{Error, Result};
use crate::projection::project;
use crate::sparse::norm2;

/// Objective over switching times with a gradient oracle.
pub trait Objective {
    fn horizon(&self) -> f64;

    fn value(&self, tau: &[f64]) -> Result<f64>;

    fn value_and_gradient(&self, tau: &[f64]) -> Result<(f64, Vec<f64>)>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub gamma: f64,
    pub max_iters: usize,
    pub tol_residual: f64,
    pub tol_relative_change: f64,
    pub l_init: f64,
    pub warm_start_l: bool,
    pub max_doublings: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            gamma: 0.5,
            max_iters: 200,
            tol_residual: 1e-8,
            tol_relative_change: 1e-8,
            l_init: 1.0,
            warm_start_l: false,
            max_doublings: 60,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad(format!("gamma must lie in (0, 1), got {}", self.gamma));
        }
        if !(self.tol_residual > 0.0 && self.tol_relative_change > 0.0) {
            return bad("tolerances must be positive".into());
        }
        if !(self.l_init > 0.0 && self.l_init.is_finite()) {
            return bad(format!("L_init must be positive, got {}", self.l_init));
        }
        if self.max_iters == 0 {
            return bad("max_iters must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// `𝒥(τ_k)`.
    pub objective: f64,
    /// `r_k = ‖τ_{k+1} − τ_k‖`.
    pub residual: f64,
    /// Accepted `L_k`.
    pub l: f64,
    pub n_backtracks: usize,
    pub tau: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Residual,
    RelativeChange,
    MaxIters,
}

impl StopReason {
    pub fn is_tolerance(self) -> bool {
        self != StopReason::MaxIters
    }

    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::Residual => "residual",
            StopReason::RelativeChange => "relative_change",
            StopReason::MaxIters => "max_iters",
        }
    }
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct OptimizeResult {
    /// The last accepted iterate `τ_{k+1}`.
    pub tau: Vec<f64>,
    pub objective: f64,
    /// Residual of the last recorded iteration.
    pub residual: f64,
    pub stop_reason: StopReason,
    pub history: Vec<IterationRecord>,
}

impl OptimizeResult {
    pub fn iterations(&self) -> usize {
        self.history.len()
    }
}

pub fn optimize<O: Objective + ?Sized>(
    tau0: &[f64],
    objective: &O,
    config: &OptimizerConfig,
) -> Result<OptimizeResult> {
    config.validate()?;
    let horizon = objective.horizon();
    if !is_feasible(tau0, horizon) {
        return Err(Error::InvalidParameter(format!(
            "initial switching times {tau0:?} are not ordered within [0, {horizon}]"
        )));
    }
    let mut tau = tau0.to_vec();
    let (mut value, mut grad) = objective.value_and_gradient(&tau)?;
    let mut history = Vec::new();
    let mut l_prev = config.l_init;
    let mut trial = vec![0.0; tau.len()];
    for iteration in 0..config.max_iters {
        let mut l = if config.warm_start_l { l_prev } else { config.l_init };
        let mut doublings = 0;
        let (trial_value, step_sq) = loop {
            let shifted: Vec<f64> = tau.iter().zip(&grad).map(|(t, g)| t - g / l).collect();
            trial = project(&shifted, horizon);
            let step_sq: f64 = trial.iter().zip(&tau).map(|(a, b)| (a - b) * (a - b)).sum();
            let trial_value = objective.value(&trial)?;
            if value - trial_value >= config.gamma * l * step_sq {
                break (trial_value, step_sq);
            }
            doublings += 1;
            if doublings > config.max_doublings {
                return Err(Error::BacktrackingFailed { doublings });
            }
            l *= 2.0;
        };
        l_prev = l;
        let residual = step_sq.sqrt();
        let tau_norm = norm2(&tau);
        history.push(IterationRecord {
            iteration,
            objective: value,
            residual,
            l,
            n_backtracks: doublings,
            tau: tau.clone(),
        });
        std::mem::swap(&mut tau, &mut trial);
        value = trial_value;
        let stop = if residual < config.tol_residual {
            Some(StopReason::Residual)
        } else if tau_norm > 0.0 && residual / tau_norm < config.tol_relative_change {
            Some(StopReason::RelativeChange)
        } else {
            None
        };
        if let Some(stop_reason) = stop {
            return Ok(OptimizeResult {
                tau,
                objective: value,
                residual,
                stop_reason,
                history,
            });
        }
        if iteration + 1 < config.max_iters {
            let (v, g) = objective.value_and_gradient(&tau)?;
            value = v;
            grad = g;
        }
    }
    let residual = history.last().map_or(0.0, |r| r.residual);
    Ok(OptimizeResult {
        tau,
        objective: value,
        residual,
        stop_reason: StopReason::MaxIters,
        history,
    })
}

const DESCENT_TOL: f64 = 1e-14;

/// Whether the recorded objective values never increase.
pub fn check_descent(history: &[IterationRecord]) -> bool {
    history
        .windows(2)
        .all(|w| w[1].objective <= w[0].objective + DESCENT_TOL)
}

/// Writes `iteration,objective,residual,L,n_backtracks,tau_1..tau_n`.
pub fn write_history_csv<W: Write>(history: &[IterationRecord], out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    let n = history.first().map_or(0, |r| r.tau.len());
    let mut header: Vec<String> = ["iteration", "objective", "residual", "L", "n_backtracks"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((1..=n).map(|i| format!("tau_{i}")));
    writer.write_record(&header)?;
    for r in history {
        let mut row = vec![
            r.iteration.to_string(),
            format!("{:e}", r.objective),
            format!("{:e}", r.residual),
            format!("{:e}", r.l),
            r.n_backtracks.to_string(),
        ];
        row.extend(r.tau.iter().map(|t| format!("{t}")));
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projection::qp_oracle_project;

    /// `½‖A(τ − c)‖²` with a diagonal `A`.
    struct Quadratic {
        center: Vec<f64>,
        scales: Vec<f64>,
    }

    impl Objective for Quadratic {
        fn horizon(&self) -> f64 {
            1.0
        }

        fn value(&self, tau: &[f64]) -> Result<f64> {
            Ok(0.5
                * tau
                    .iter()
                    .zip(&self.center)
                    .zip(&self.scales)
                    .map(|((t, c), a)| a * (t - c) * (t - c))
                    .sum::<f64>())
        }

        fn value_and_gradient(&self, tau: &[f64]) -> Result<(f64, Vec<f64>)> {
            let g = tau
                .iter()
                .zip(&self.center)
                .zip(&self.scales)
                .map(|((t, c), a)| a * (t - c))
                .collect();
            Ok((self.value(tau)?, g))
        }
    }

    /// Returns the negated gradient, so no step ever decreases the value.
    struct Ascent(Quadratic);

    impl Objective for Ascent {
        fn horizon(&self) -> f64 {
            1.0
        }

        fn value(&self, tau: &[f64]) -> Result<f64> {
            self.0.value(tau)
        }

        fn value_and_gradient(&self, tau: &[f64]) -> Result<(f64, Vec<f64>)> {
            let (v, g) = self.0.value_and_gradient(tau)?;
            Ok((v, g.into_iter().map(|x| -x).collect()))
        }
    }

    fn unit(center: Vec<f64>) -> Quadratic {
        let scales = vec![1.0; center.len()];
        Quadratic { center, scales }
    }

    #[test]
    fn interior_minimizer_in_one_step() {
        let q = unit(vec![0.1, 0.4, 0.5, 0.9]);
        let res = optimize(&[0.2, 0.2, 0.6, 0.6], &q, &OptimizerConfig::default()).unwrap();
        assert!(res.iterations() <= 5);
        assert_eq!(res.stop_reason, StopReason::Residual);
        for (a, b) in res.tau.iter().zip(&q.center) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(res.residual < 1e-8);
    }

    #[test]
    fn exterior_minimizer_is_projected() {
        let center = vec![0.7, -0.3, 1.4, 0.2, 0.9];
        let q = unit(center.clone());
        let res = optimize(&[0.0, 0.2, 0.4, 0.6, 0.8], &q, &OptimizerConfig::default()).unwrap();
        let target = qp_oracle_project(&center, 1.0);
        for (a, b) in res.tau.iter().zip(&target) {
            assert!((a - b).abs() < 1e-8, "{:?} vs {target:?}", res.tau);
        }
        assert!(res.stop_reason.is_tolerance());
    }

    #[test]
    fn stiff_quadratic_needs_backtracking() {
        let q = Quadratic {
            center: vec![0.3, 0.6],
            scales: vec![40.0, 1.0],
        };
        let res = optimize(&[0.0, 1.0], &q, &OptimizerConfig::default()).unwrap();
        assert!(res.history[0].n_backtracks > 0);
        assert!(res.history.iter().all(|r| r.l >= 1.0));
        assert!(check_descent(&res.history));
        assert!(res.history.iter().all(|r| is_feasible(&r.tau, 1.0)));
        assert!((res.tau[0] - 0.3).abs() < 1e-7 && (res.tau[1] - 0.6).abs() < 1e-6);
    }

    #[test]
    fn warm_start_keeps_the_accepted_l() {
        let q = Quadratic {
            center: vec![0.3, 0.6],
            scales: vec![40.0, 1.0],
        };
        let config = OptimizerConfig {
            warm_start_l: true,
            max_iters: 5,
            ..OptimizerConfig::default()
        };
        let res = optimize(&[0.0, 1.0], &q, &config).unwrap();
        assert!(res.history.iter().skip(1).all(|r| r.n_backtracks == 0));
    }

    #[test]
    fn max_iters_is_reported() {
        let q = Quadratic {
            center: vec![0.3, 0.6],
            scales: vec![1e-3, 1e-3],
        };
        let config = OptimizerConfig {
            max_iters: 3,
            ..OptimizerConfig::default()
        };
        let res = optimize(&[0.0, 1.0], &q, &config).unwrap();
        assert_eq!(res.stop_reason, StopReason::MaxIters);
        assert_eq!(res.iterations(), 3);
    }

    #[test]
    fn ascent_direction_exhausts_backtracking() {
        let q = Ascent(unit(vec![0.3, 0.6]));
        let config = OptimizerConfig {
            max_doublings: 20,
            ..OptimizerConfig::default()
        };
        let err = optimize(&[0.1, 0.9], &q, &config).unwrap_err();
        assert!(matches!(err, Error::BacktrackingFailed { .. }));
    }

    #[test]
    fn rejects_bad_inputs() {
        let q = unit(vec![0.3, 0.6]);
        assert!(optimize(&[0.6, 0.3], &q, &OptimizerConfig::default()).is_err());
        let config = OptimizerConfig {
            gamma: 1.0,
            ..OptimizerConfig::default()
        };
        assert!(optimize(&[0.3, 0.6], &q, &config).unwrap_err().is_invalid_input());
    }

    #[test]
    fn descent_check() {
        let record = |objective| IterationRecord {
            iteration: 0,
            objective,
            residual: 0.0,
            l: 1.0,
            n_backtracks: 0,
            tau: vec![],
        };
        assert!(check_descent(&[record(3.0), record(2.0), record(2.0)]));
        assert!(!check_descent(&[record(3.0), record(2.0), record(2.5)]));
        assert!(check_descent(&[record(1.0)]));
    }

    #[test]
    fn history_csv_layout() {
        let q = unit(vec![0.1, 0.4]);
        let res = optimize(&[0.2, 0.3], &q, &OptimizerConfig::default()).unwrap();
        let mut buf = Vec::new();
        write_history_csv(&res.history, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "iteration,objective,residual,L,n_backtracks,tau_1,tau_2");
        assert_eq!(lines.count(), res.iterations());
    }
}
