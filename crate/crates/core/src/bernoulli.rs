//! Bernoulli trials under the joint and the normalized power prior.
//!
//! The historical likelihood may carry an arbitrary constant factor `c₀`
//! (Bernoulli vs binomial sampling). The normalized prior divides it out; the
//! joint prior keeps it as `c₀^δ`, which reweights δ.

use serde::{Deserialize, Serialize};

use crate::error::{PowerPriorError, Result};
use crate::special::ln_beta;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BernoulliHistory {
    pub y0: u64,
    pub n0: u64,
    pub a1: f64,
    pub a2: f64,
}

impl BernoulliHistory {
    pub fn new(y0: u64, n0: u64, a1: f64, a2: f64) -> Result<Self> {
        if n0 == 0 || y0 > n0 {
            return Err(PowerPriorError::InvalidHyperparameter(format!(
                "need 0 <= y0 <= n0 and n0 > 0, got y0 = {y0}, n0 = {n0}"
            )));
        }
        if !(a1 > 0.0 && a1.is_finite() && a2 > 0.0 && a2.is_finite()) {
            return Err(PowerPriorError::InvalidHyperparameter(format!(
                "Beta shapes must be positive, got ({a1}, {a2})"
            )));
        }
        Ok(Self { y0, n0, a1, a2 })
    }

    fn shapes(&self, delta: f64) -> (f64, f64) {
        (
            delta * self.y0 as f64 + self.a1,
            delta * (self.n0 - self.y0) as f64 + self.a2,
        )
    }
}

fn check(theta: f64, delta: f64) -> Result<()> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(PowerPriorError::DomainError(theta));
    }
    if !(0.0..=1.0).contains(&delta) {
        return Err(PowerPriorError::DomainError(delta));
    }
    Ok(())
}

/// `log π₀(θ) + δ [log c₀ + y₀ log θ + (n₀-y₀) log(1-θ)]`, Beta initial prior.
fn powered_kernel(theta: f64, delta: f64, hist: &BernoulliHistory, log_c0: f64) -> f64 {
    let (s1, s2) = hist.shapes(delta);
    delta * log_c0 + (s1 - 1.0) * theta.ln() + (s2 - 1.0) * (-theta).ln_1p() - ln_beta(hist.a1, hist.a2)
}

/// Conditional log-density of θ given δ under the normalized power prior.
pub fn npp_log_density(theta: f64, delta: f64, hist: &BernoulliHistory, log_c0: f64) -> Result<f64> {
    check(theta, delta)?;
    let (s1, s2) = hist.shapes(delta);
    // ∫ c₀^δ L^δ π₀ dθ = c₀^δ B(s1, s2) / B(a1, a2)
    let log_norm = delta * log_c0 + ln_beta(s1, s2) - ln_beta(hist.a1, hist.a2);
    Ok(powered_kernel(theta, delta, hist, log_c0) - log_norm)
}

/// Unnormalized joint log-kernel of (θ, δ) under the joint power prior with
/// a uniform prior on δ.
pub fn jpp_log_kernel(theta: f64, delta: f64, hist: &BernoulliHistory, log_c0: f64) -> Result<f64> {
    check(theta, delta)?;
    Ok(powered_kernel(theta, delta, hist, log_c0))
}

/// One row of the likelihood-principle table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InvarianceRow {
    pub delta: f64,
    /// Largest change in the normalized density over θ when `log c₀` varies.
    pub npp_max_change: f64,
    /// Shift in `log π_J(θ, δ) - log π_J(θ, δ_ref)` caused by `log c₀`.
    pub jpp_ratio_shift: f64,
    /// The predicted shift, `(δ - δ_ref)·log c₀`.
    pub expected_shift: f64,
}

/// Compares `log c₀ = 0` with `log c₀ = log_c0` across δ, with `δ_ref = 0`.
pub fn likelihood_principle_table(
    hist: &BernoulliHistory,
    deltas: &[f64],
    thetas: &[f64],
    log_c0: f64,
) -> Result<Vec<InvarianceRow>> {
    let theta_ref = *thetas.first().ok_or(PowerPriorError::EmptyDomain)?;
    deltas
        .iter()
        .map(|&d| {
            let mut npp_max_change = 0.0f64;
            for &th in thetas {
                let a = npp_log_density(th, d, hist, 0.0)?;
                let b = npp_log_density(th, d, hist, log_c0)?;
                npp_max_change = npp_max_change.max((a - b).abs());
            }
            let with = jpp_log_kernel(theta_ref, d, hist, log_c0)? - jpp_log_kernel(theta_ref, 0.0, hist, log_c0)?;
            let without = jpp_log_kernel(theta_ref, d, hist, 0.0)? - jpp_log_kernel(theta_ref, 0.0, hist, 0.0)?;
            Ok(InvarianceRow {
                delta: d,
                npp_max_change,
                jpp_ratio_shift: with - without,
                expected_shift: d * log_c0,
            })
        })
        .collect()
}
