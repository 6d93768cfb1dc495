//! Switching-point-to-control map.
//!
//! The control at time `t` is `c(t) ψ` with the integer multiplier
//! `c(t) = Σ_i coeff_i χ̄(τ_i, τ_{i+1}, t)`, where `χ̄` is the signed interval
//! indicator that equals `-1` on reversed intervals. On ordered switching
//! times it coincides with the ordinary characteristic function, and outside
//! the ordered set it keeps the map smooth in the weak sense.
//!
//! Time discretization averages `c` over each slab `[t_{i-1}, t_i]` against
//! the hat function `v_i` that vanishes at the slab ends and peaks at the
//! midpoint. Because `c` is piecewise constant the averages are integrals of
//! a piecewise quadratic primitive and are computed in closed form.

use std::ops::Deref;

use crate::error::{Error, Result};

/// Switching times `τ ∈ ℝⁿ`, not necessarily ordered.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchTimes(Vec<f64>);

impl SwitchTimes {
    pub fn new(tau: Vec<f64>) -> Result<Self> {
        if let Some(bad) = tau.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "switching time {bad} is not finite"
            )));
        }
        Ok(Self(tau))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// `0 ≤ τ_1 ≤ … ≤ τ_n ≤ horizon`, checked exactly.
    pub fn is_feasible(&self, horizon: f64) -> bool {
        is_feasible(&self.0, horizon)
    }
}

impl Deref for SwitchTimes {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

pub fn is_feasible(tau: &[f64], horizon: f64) -> bool {
    tau.first().is_none_or(|&t| t >= 0.0)
        && tau.last().is_none_or(|&t| t <= horizon)
        && tau.windows(2).all(|w| w[0] <= w[1])
}

/// Form functions `ψ_i = coeff_i ψ`, `i = 1..n-1`, sharing one nodal profile.
#[derive(Debug, Clone)]
pub struct FormPattern {
    coefficients: Vec<f64>,
    psi: Vec<f64>,
}

impl FormPattern {
    /// On/off switching: `ψ_i = ψ` for odd `i` and `0` for even `i`.
    pub fn alternating(n: usize, psi: Vec<f64>) -> Result<Self> {
        let coefficients = (1..n).map(|i| if i % 2 == 1 { 1.0 } else { 0.0 }).collect();
        Self::new(n, coefficients, psi)
    }

    pub fn new(n: usize, coefficients: Vec<f64>, psi: Vec<f64>) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 switching points, got {n}"
            )));
        }
        if coefficients.len() != n - 1 {
            return Err(Error::DimensionMismatch {
                context: "form-function coefficients",
                expected: n - 1,
                found: coefficients.len(),
            });
        }
        Ok(Self { coefficients, psi })
    }

    /// Number of switching points.
    pub fn n(&self) -> usize {
        self.coefficients.len() + 1
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn psi(&self) -> &[f64] {
        &self.psi
    }

    /// Multiplier of `ψ` in `ψ_{j-1} − ψ_j` for the 0-based switch index `j`;
    /// out-of-range form functions count as zero.
    pub fn switch_coefficient(&self, j: usize) -> f64 {
        let before = if j >= 1 { self.coefficients[j - 1] } else { 0.0 };
        let after = self.coefficients.get(j).copied().unwrap_or(0.0);
        before - after
    }

    pub(crate) fn check_len(&self, tau: &[f64]) -> Result<()> {
        if tau.len() != self.n() {
            return Err(Error::DimensionMismatch {
                context: "switching times",
                expected: self.n(),
                found: tau.len(),
            });
        }
        Ok(())
    }
}

/// Signed interval indicator: `1` on `[a, b)`, `-1` on `(b, a]`, else `0`.
pub fn chi_bar(a: f64, b: f64, t: f64) -> i8 {
    if a <= t && t < b {
        1
    } else if b < t && t <= a {
        -1
    } else {
        0
    }
}

/// Integer multiplier `c(t)` of `ψ` at time `t`.
pub fn control_scalar(tau: &[f64], pattern: &FormPattern, t: f64) -> f64 {
    pattern
        .coefficients()
        .iter()
        .enumerate()
        .map(|(i, &c)| c * f64::from(chi_bar(tau[i], tau[i + 1], t)))
        .sum()
}

/// Time slab `[start, end]` with its averaging hat.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Slab {
    pub start: f64,
    pub end: f64,
}

impl Slab {
    pub fn new(start: f64, end: f64) -> Self {
        debug_assert!(end > start);
        Self { start, end }
    }

    pub fn width(&self) -> f64 {
        self.end - self.start
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.start + self.end)
    }

    /// `∫ v` over the slab.
    pub fn hat_mass(&self) -> f64 {
        0.5 * self.width()
    }

    /// Hat value `v(t)`, zero outside the slab.
    pub fn hat(&self, t: f64) -> f64 {
        if t <= self.start || t >= self.end {
            return 0.0;
        }
        let u = (t - self.start) / self.width();
        if u <= 0.5 {
            2.0 * u
        } else {
            2.0 * (1.0 - u)
        }
    }

    /// `∫_{start}^{x} v`, clamped to `[0, hat_mass]` outside the slab.
    pub fn hat_primitive(&self, x: f64) -> f64 {
        let dt = self.width();
        if x <= self.start {
            return 0.0;
        }
        if x >= self.end {
            return 0.5 * dt;
        }
        let u = (x - self.start) / dt;
        if u <= 0.5 {
            dt * u * u
        } else {
            let r = 1.0 - u;
            dt * (0.5 - r * r)
        }
    }

    /// `∫ t v(t) dt` over the slab.
    pub fn hat_first_moment(&self) -> f64 {
        self.hat_mass() * self.midpoint()
    }

    /// `∫ t² v(t) dt` over the slab.
    pub fn hat_second_moment(&self) -> f64 {
        let m = self.midpoint();
        let w = self.width();
        self.hat_mass() * (m * m + w * w / 24.0)
    }
}

/// Hat-weighted average of `c(t)` over the slab.
///
/// Uses `∫ χ̄(a, b, t) v(t) dt = V(b) − V(a)` with the clamped hat primitive
/// `V`, which holds for both orderings of `a` and `b`. Integration is over the
/// slab only, hence implicitly over `[0, T]`.
pub fn slab_weight(tau: &[f64], pattern: &FormPattern, slab: &Slab) -> f64 {
    let integral: f64 = pattern
        .coefficients()
        .iter()
        .enumerate()
        .filter(|(_, &c)| c != 0.0)
        .map(|(i, &c)| c * (slab.hat_primitive(tau[i + 1]) - slab.hat_primitive(tau[i])))
        .sum();
    integral / slab.hat_mass()
}

/// Partial derivative of [`slab_weight`] with respect to `τ_j` (0-based).
pub fn slab_weight_derivative(tau: &[f64], pattern: &FormPattern, slab: &Slab, j: usize) -> f64 {
    pattern.switch_coefficient(j) * slab.hat(tau[j]) / slab.hat_mass()
}
