//! Euclidean projection onto `{0 ≤ τ_1 ≤ … ≤ τ_n ≤ T}`.
//!
//! The unconstrained isotonic fit is found by prefix-mean pooling: starting
//! after the last breakpoint, the next block ends at the first index that
//! minimizes the running mean. Clamping the pooled vector to `[0, T]` then
//! gives the projection onto the bounded set.

use crate::error::{Error, Result};

/// Block structure of the isotonic fit.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolBlocks {
    /// `0 = m_0 < m_1 < … < m_ℓ = n`.
    pub breakpoints: Vec<usize>,
    pub block_means: Vec<f64>,
}

impl PoolBlocks {
    /// Each entry replaced by the mean of its block.
    pub fn expand(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(*self.breakpoints.last().unwrap_or(&0));
        for (w, &mean) in self.breakpoints.windows(2).zip(&self.block_means) {
            out.extend(std::iter::repeat_n(mean, w[1] - w[0]));
        }
        out
    }
}

pub fn pool(tau: &[f64]) -> PoolBlocks {
    let n = tau.len();
    let mut breakpoints = vec![0];
    let mut block_means = Vec::new();
    let mut start = 0;
    while start < n {
        let mut sum = 0.0;
        let mut best = f64::INFINITY;
        let mut best_end = start + 1;
        for (offset, &t) in tau[start..].iter().enumerate() {
            sum += t;
            let mean = sum / (offset + 1) as f64;
            if mean < best {
                best = mean;
                best_end = start + offset + 1;
            }
        }
        breakpoints.push(best_end);
        block_means.push(best);
        start = best_end;
    }
    PoolBlocks {
        breakpoints,
        block_means,
    }
}

pub fn project(tau: &[f64], horizon: f64) -> Vec<f64> {
    pool(tau)
        .expand()
        .into_iter()
        .map(|v| v.min(horizon).max(0.0))
        .collect()
}

/// Brute-force projection: enumerates every active set of the `n + 1`
/// inequality constraints and keeps the feasible KKT point.
///
/// Exponential in `n`; meant as a test oracle for small `n`.
pub fn qp_oracle_project(tau: &[f64], horizon: f64) -> Vec<f64> {
    let n = tau.len();
    if n == 0 {
        return Vec::new();
    }
    assert!(n <= 16, "oracle projection is exponential in n");
    let scale = tau.iter().fold(horizon.abs(), |m, v| m.max(v.abs())).max(1.0);
    let tol = 1e-12 * scale * n as f64;
    let mut best: Option<(f64, Vec<f64>)> = None;
    // bit 0: τ_1 ≥ 0; bit i (1..n-1): τ_i ≤ τ_{i+1}; bit n: τ_n ≤ T
    for mask in 0u32..(1 << (n + 1)) {
        let active = |c: usize| mask & (1 << c) != 0;
        let mut x = vec![0.0; n];
        let mut start = 0;
        let mut consistent = true;
        while start < n {
            let mut end = start + 1;
            while end < n && active(end) {
                end += 1;
            }
            let lower = start == 0 && active(0);
            let upper = end == n && active(n);
            let value = match (lower, upper) {
                (true, true) => {
                    consistent = false;
                    break;
                }
                (true, false) => 0.0,
                (false, true) => horizon,
                (false, false) => tau[start..end].iter().sum::<f64>() / (end - start) as f64,
            };
            x[start..end].iter_mut().for_each(|v| *v = value);
            start = end;
        }
        if !consistent {
            continue;
        }
        let feasible = x[0] >= -tol
            && x[n - 1] <= horizon + tol
            && x.windows(2).all(|w| w[0] <= w[1] + tol);
        if !feasible {
            continue;
        }
        // μ_i = μ_0 + Σ_{j≤i}(τ_j − x_j); μ_0 from the first free constraint
        let mut mu = vec![0.0; n + 1];
        if active(0) {
            let first_end = (1..n).find(|&c| !active(c)).unwrap_or(n);
            mu[0] = -tau[..first_end].iter().sum::<f64>();
        }
        for i in 1..=n {
            mu[i] = mu[i - 1] + (tau[i - 1] - x[i - 1]);
        }
        let kkt = (0..=n).all(|c| {
            if active(c) {
                mu[c] >= -tol
            } else {
                mu[c].abs() <= tol
            }
        });
        if !kkt {
            continue;
        }
        let dist: f64 = x.iter().zip(tau).map(|(a, b)| (a - b) * (a - b)).sum();
        if best.as_ref().is_none_or(|(d, _)| dist < *d) {
            best = Some((dist, x));
        }
    }
    best.expect("the feasible set is nonempty").1
}

const KKT_TOL: f64 = 1e-10;

/// Builds the multipliers of the projection from the pooled vector and
/// checks feasibility, the gradient equation and complementarity.
///
/// Returns `λ ∈ ℝ^{n+1}`, where `λ_1` belongs to `τ_1 ≥ 0`, `λ_i` to
/// `τ_{i-1} ≤ τ_i` and `λ_{n+1}` to `τ_n ≤ T`.
pub fn kkt_verify(tau: &[f64], tau_star: &[f64], horizon: f64) -> Result<Vec<f64>> {
    let n = tau.len();
    if tau_star.len() != n {
        return Err(Error::DimensionMismatch {
            context: "projected switching times",
            expected: n,
            found: tau_star.len(),
        });
    }
    let pooled = pool(tau).expand();
    let mut lambda = vec![0.0; n + 1];
    lambda[0] = -pooled.iter().map(|&v| v.min(0.0)).sum::<f64>();
    let mut running = lambda[0];
    for i in 1..n {
        running += tau[i - 1] - tau_star[i - 1];
        lambda[i] = running;
    }
    lambda[n] = pooled.iter().map(|&v| (v - horizon).max(0.0)).sum();

    if n > 0 {
        let feasible = tau_star[0] >= -KKT_TOL
            && tau_star[n - 1] <= horizon + KKT_TOL
            && tau_star.windows(2).all(|w| w[0] <= w[1] + KKT_TOL);
        if !feasible {
            return Err(Error::KktViolation("feasibility".into()));
        }
    }
    for i in 0..n {
        let residual = tau_star[i] - tau[i] + lambda[i + 1] - lambda[i];
        if residual.abs() > KKT_TOL {
            return Err(Error::KktViolation(format!(
                "gradient equation at component {} (residual {residual:e})",
                i + 1
            )));
        }
    }
    for (i, &l) in lambda.iter().enumerate() {
        if l < -KKT_TOL {
            return Err(Error::KktViolation(format!(
                "complementarity: multiplier {} is negative ({l:e})",
                i + 1
            )));
        }
        let lower = if i == 0 { 0.0 } else { tau_star[i - 1] };
        let upper = if i == n { horizon } else { tau_star[i] };
        if (l * (lower - upper)).abs() > KKT_TOL {
            return Err(Error::KktViolation(format!(
                "complementarity: constraint {} is slack with multiplier {l:e}",
                i + 1
            )));
        }
    }
    Ok(lambda)
}
