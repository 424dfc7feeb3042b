//! Closed forms for the power prior under the normal linear model.
//!
//! With `Λ₀ = δX₀'X₀ + kR` and `Λ = X'X + Λ₀`:
//!
//! ```text
//! ν₀ = (n₀δ - p)/2 + t - 1            ν = ν₀ + n/2
//! β̃  = Λ₀⁻¹ (δX₀'Y₀ + kRμ₀)           β* = Λ⁻¹ (X'Y + δX₀'Y₀ + kRμ₀)
//! H₀ = b + δ{S₀ + k(μ₀-β̂₀)'X₀'X₀ Λ₀⁻¹ R(μ₀-β̂₀)}/2
//! H  = H₀ + {S + (β̃-β̂)'X'X Λ⁻¹ Λ₀ (β̃-β̂)}/2
//! ```
//!
//! `log C(δ)` and `log m(δ)` are exact log-integrals, `(2π)` powers included.
//! DIC and `p_D` drop the additive `n log 2π`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::GaussianSuffStats;
use crate::error::{PowerPriorError, Result};
use crate::linalg::{quad_form, symmetrize, SpdFactor};
use crate::prior::{feasible_set, FeasibleSet, PriorSpec};
use crate::special::{digamma, ln_gamma};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Prior, historical and current statistics bound together.
#[derive(Debug, Clone)]
pub struct PowerPosteriorContext {
    pub prior: PriorSpec,
    pub stats0: GaussianSuffStats,
    pub stats: GaussianSuffStats,
    pub feasible: FeasibleSet,
}

impl PowerPosteriorContext {
    pub fn new(prior: PriorSpec, stats0: GaussianSuffStats, stats: GaussianSuffStats) -> Result<Self> {
        prior.validate()?;
        if stats0.p != stats.p || prior.p() != stats.p {
            return Err(PowerPriorError::ShapeMismatch(format!(
                "dimensions disagree: prior p = {}, historical p = {}, current p = {}",
                prior.p(),
                stats0.p,
                stats.p
            )));
        }
        let feasible = feasible_set(&prior, stats0.n, stats0.p)?;
        Ok(Self {
            prior,
            stats0,
            stats,
            feasible,
        })
    }

    pub fn p(&self) -> usize {
        self.stats.p
    }
}

/// Every intermediate symbol of the closed forms at one δ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NigCoefficients {
    pub nu0: f64,
    pub nu: f64,
    pub beta_tilde: DVector<f64>,
    pub beta_star: DVector<f64>,
    pub lambda0: DMatrix<f64>,
    pub lambda: DMatrix<f64>,
    pub h0: f64,
    pub h: f64,
}

/// Conditional posterior `N_p-Γ⁻¹(β*, Λ, ν, H)` of `(β, σ²)` given δ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NigPosterior {
    pub location: DVector<f64>,
    pub precision: DMatrix<f64>,
    pub shape: f64,
    pub scale: f64,
}

impl NigPosterior {
    pub fn is_proper(&self) -> bool {
        self.shape > 0.0 && self.scale > 0.0 && SpdFactor::new(&self.precision).is_ok()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorMoments {
    pub mean_beta: DVector<f64>,
    pub mean_sigma2: f64,
    pub cov_beta: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDraw {
    pub beta: DVector<f64>,
    pub sigma2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DicValue {
    pub dic: f64,
    pub p_d: f64,
    /// Deviance at `(β*, H/(ν-1))`, same constant convention as `dic`.
    pub deviance_at_mean: f64,
}

/// The pieces that depend on the prior and the historical data only.
struct HistoricalTerms {
    nu0: f64,
    lambda0: DMatrix<f64>,
    factor0: SpdFactor,
    rhs0: DVector<f64>,
    beta_tilde: DVector<f64>,
    h0: f64,
}

fn check_unit(delta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(PowerPriorError::OutsideFeasibleSet { delta });
    }
    Ok(())
}

fn historical_terms(delta: f64, prior: &PriorSpec, stats0: &GaussianSuffStats) -> Result<HistoricalTerms> {
    let p = stats0.p;
    if prior.p() != p {
        return Err(PowerPriorError::ShapeMismatch(format!(
            "prior has dimension {} but p = {p}",
            prior.p()
        )));
    }
    if delta == 0.0 && prior.k == 0 {
        return Err(PowerPriorError::SingularSystem);
    }
    let k = prior.k as f64;
    let mut lambda0 = &stats0.xtx * delta + &prior.r * k;
    symmetrize(&mut lambda0);
    let factor0 = SpdFactor::new(&lambda0)?;
    let rhs0 = &stats0.xty * delta + (&prior.r * &prior.mu0) * k;
    let beta_tilde = factor0.solve(&rhs0);

    let mut quad0 = 0.0;
    if prior.k == 1 {
        let d = &prior.mu0 - &stats0.beta_hat;
        let w = factor0.solve(&(&prior.r * &d));
        quad0 = (&stats0.xtx * &d).dot(&w).max(0.0);
    }
    let h0 = prior.b + delta * (stats0.s + quad0) / 2.0;
    let nu0 = (stats0.n as f64 * delta - p as f64) / 2.0 + prior.t - 1.0;
    Ok(HistoricalTerms {
        nu0,
        lambda0,
        factor0,
        rhs0,
        beta_tilde,
        h0,
    })
}

struct FullTerms {
    hist: HistoricalTerms,
    nu: f64,
    lambda: DMatrix<f64>,
    factor: SpdFactor,
    beta_star: DVector<f64>,
    h: f64,
}

fn full_terms(delta: f64, ctx: &PowerPosteriorContext) -> Result<FullTerms> {
    let hist = historical_terms(delta, &ctx.prior, &ctx.stats0)?;
    let st = &ctx.stats;
    let mut lambda = &st.xtx + &hist.lambda0;
    symmetrize(&mut lambda);
    let factor = SpdFactor::new(&lambda)?;
    let beta_star = factor.solve(&(&st.xty + &hist.rhs0));
    let e = &hist.beta_tilde - &st.beta_hat;
    let cross = (&st.xtx * &e).dot(&factor.solve(&(&hist.lambda0 * &e))).max(0.0);
    let h = hist.h0 + (st.s + cross) / 2.0;
    let nu = hist.nu0 + st.n as f64 / 2.0;
    Ok(FullTerms {
        hist,
        nu,
        lambda,
        factor,
        beta_star,
        h,
    })
}

/// All intermediate symbols at `delta`.
pub fn nig_coefficients(delta: f64, ctx: &PowerPosteriorContext) -> Result<NigCoefficients> {
    check_unit(delta)?;
    let f = full_terms(delta, ctx)?;
    Ok(NigCoefficients {
        nu0: f.hist.nu0,
        nu: f.nu,
        beta_tilde: f.hist.beta_tilde,
        beta_star: f.beta_star,
        lambda0: f.hist.lambda0,
        lambda: f.lambda,
        h0: f.hist.h0,
        h: f.h,
    })
}

/// `log C(δ) = log ∫ π₀(θ) L(θ|D₀)^δ dθ`.
pub fn log_c(delta: f64, prior: &PriorSpec, stats0: &GaussianSuffStats) -> Result<f64> {
    check_unit(delta)?;
    let fs = feasible_set(prior, stats0.n, stats0.p)?;
    if !fs.admits(delta) {
        return Err(PowerPriorError::OutsideFeasibleSet { delta });
    }
    let h = historical_terms(delta, prior, stats0)?;
    if !(h.nu0 > 0.0) {
        return Err(PowerPriorError::OutsideFeasibleSet { delta });
    }
    if !(h.h0 > 0.0) {
        return Err(PowerPriorError::NonpositiveScale(h.h0));
    }
    let p = stats0.p as f64;
    let n0 = stats0.n as f64;
    Ok(-(n0 * delta - p) / 2.0 * LN_2PI + ln_gamma(h.nu0) - 0.5 * h.factor0.logdet()
        - h.nu0 * h.h0.ln()
        + prior.log_normalizer())
}

/// `log m(δ | D₀, D) = log ∫ L(θ|D) π(θ|D₀, δ) dθ`.
pub fn log_marginal_likelihood(delta: f64, ctx: &PowerPosteriorContext) -> Result<f64> {
    check_unit(delta)?;
    if !ctx.feasible.admits(delta) {
        return Err(PowerPriorError::OutsideFeasibleSet { delta });
    }
    let f = full_terms(delta, ctx)?;
    if !(f.hist.nu0 > 0.0) {
        return Err(PowerPriorError::OutsideFeasibleSet { delta });
    }
    if !(f.hist.h0 > 0.0) {
        return Err(PowerPriorError::NonpositiveScale(f.hist.h0));
    }
    if !(f.h > 0.0) {
        return Err(PowerPriorError::NonpositiveScale(f.h));
    }
    let n = ctx.stats.n as f64;
    Ok(-n / 2.0 * LN_2PI + ln_gamma(f.nu) - ln_gamma(f.hist.nu0)
        + 0.5 * f.hist.factor0.logdet()
        - 0.5 * f.factor.logdet()
        + f.hist.nu0 * f.hist.h0.ln()
        - f.nu * f.h.ln())
}

/// Conditional posterior of `(β, σ²)` at a fixed δ. The prior need not be
/// proper at δ; only the posterior must be.
pub fn posterior(delta: f64, ctx: &PowerPosteriorContext) -> Result<NigPosterior> {
    check_unit(delta)?;
    let st = &ctx.stats;
    let improper = |reason: String| PowerPriorError::ImproperPosterior { delta, reason };
    let post = if delta == 0.0 && ctx.prior.k == 0 {
        // No historical or prior information on β: the current data alone.
        let p = st.p as f64;
        NigPosterior {
            location: st.beta_hat.clone(),
            precision: st.xtx.clone(),
            shape: -p / 2.0 + ctx.prior.t - 1.0 + st.n as f64 / 2.0,
            scale: ctx.prior.b + st.s / 2.0,
        }
    } else {
        let f = full_terms(delta, ctx).map_err(|e| match e {
            PowerPriorError::NotPositiveDefinite => improper("precision is not positive definite".into()),
            other => other,
        })?;
        NigPosterior {
            location: f.beta_star,
            precision: f.lambda,
            shape: f.nu,
            scale: f.h,
        }
    };
    if !(post.shape > 0.0) {
        return Err(improper(format!("shape {} is not positive", post.shape)));
    }
    if !(post.scale > 0.0) {
        return Err(improper(format!("scale {} is not positive", post.scale)));
    }
    if SpdFactor::new(&post.precision).is_err() {
        return Err(improper("precision is not positive definite".into()));
    }
    Ok(post)
}

/// `E[β] = β*`, `E[σ²] = H/(ν-1)`, `Cov[β] = E[σ²] Λ⁻¹`.
pub fn posterior_moments(post: &NigPosterior) -> Result<PosteriorMoments> {
    if !(post.shape > 1.0) {
        return Err(PowerPriorError::MomentUndefined { shape: post.shape });
    }
    let mean_sigma2 = post.scale / (post.shape - 1.0);
    let f = SpdFactor::new(&post.precision)?;
    let p = post.location.len();
    let mut cov = f.solve_mat(&DMatrix::identity(p, p)) * mean_sigma2;
    symmetrize(&mut cov);
    Ok(PosteriorMoments {
        mean_beta: post.location.clone(),
        mean_sigma2,
        cov_beta: cov,
    })
}

/// Exact conjugate draws: `σ² ~ Γ⁻¹(ν, H)`, then `β | σ² ~ N(β*, σ²Λ⁻¹)`.
/// Deterministic given `seed`.
pub fn sample_posterior(post: &NigPosterior, n_draws: usize, seed: u64) -> Result<Vec<PosteriorDraw>> {
    if !(post.shape > 0.0 && post.scale > 0.0) {
        return Err(PowerPriorError::ImproperPosterior {
            delta: f64::NAN,
            reason: format!("shape {} / scale {}", post.shape, post.scale),
        });
    }
    let f = SpdFactor::new(&post.precision).map_err(|_| PowerPriorError::ImproperPosterior {
        delta: f64::NAN,
        reason: "precision is not positive definite".into(),
    })?;
    let gamma = Gamma::new(post.shape, 1.0 / post.scale).map_err(|e| PowerPriorError::ImproperPosterior {
        delta: f64::NAN,
        reason: e.to_string(),
    })?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let p = post.location.len();
    let draws = (0..n_draws)
        .map(|_| {
            let sigma2 = 1.0 / gamma.sample(&mut rng);
            let z = DVector::from_fn(p, |_, _| StandardNormal.sample(&mut rng));
            let beta = &post.location + f.solve_upper(&z) * sigma2.sqrt();
            PosteriorDraw { beta, sigma2 }
        })
        .collect();
    Ok(draws)
}

/// DIC and `p_D` at `delta`, both without the `n log 2π` constant.
pub fn dic(delta: f64, ctx: &PowerPosteriorContext) -> Result<DicValue> {
    let post = posterior(delta, ctx)?;
    if !(post.shape > 1.0) {
        return Err(PowerPriorError::MomentUndefined { shape: post.shape });
    }
    let st = &ctx.stats;
    let n = st.n as f64;
    let (nu, h) = (post.shape, post.scale);
    let diff = &post.location - &st.beta_hat;
    let fit = quad_form(&st.xtx, &diff).max(0.0) + st.s;
    let tr = SpdFactor::new(&post.precision)?.trace_solve(&st.xtx);
    let log_nu1 = (nu - 1.0).ln();
    let psi = digamma(nu);
    let dic = n * (log_nu1 + h.ln() - 2.0 * psi) + (nu + 1.0) / h * fit + 2.0 * tr;
    let p_d = n * (log_nu1 - psi) + fit / h + tr;
    let deviance_at_mean = n * (h.ln() - log_nu1) + (nu - 1.0) / h * fit;
    Ok(DicValue {
        dic,
        p_d,
        deviance_at_mean,
    })
}

/// Unnormalized `log π(δ | D₀, D) = log m(δ) + log π₀(δ)`; `-∞` outside `𝒜`.
pub fn delta_log_posterior<F>(delta: f64, ctx: &PowerPosteriorContext, log_prior_delta: F) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if !ctx.feasible.admits(delta) {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(log_marginal_likelihood(delta, ctx)? + log_prior_delta(delta))
}

/// Uniform `π₀(δ)` on `[0, 1]`.
pub fn uniform_log_prior(_delta: f64) -> f64 {
    0.0
}

/// Tabulated marginal posterior of δ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaPosterior {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    /// Log of the Simpson-rule normalizer of `exp(log π(δ|·))` on the grid.
    pub log_normalizer: f64,
    pub mean: f64,
    pub mode: f64,
    pub feasible: FeasibleSet,
}

impl DeltaPosterior {
    /// Linear interpolation of the density; zero outside `𝒜`.
    pub fn density_at(&self, delta: f64) -> f64 {
        if !self.feasible.admits(delta) {
            return 0.0;
        }
        let (first, last) = (self.grid[0], *self.grid.last().unwrap());
        if delta < first || delta > last {
            return 0.0;
        }
        let i = self.grid.partition_point(|&g| g <= delta).clamp(1, self.grid.len() - 1);
        let (x0, x1) = (self.grid[i - 1], self.grid[i]);
        let w = (delta - x0) / (x1 - x0);
        self.density[i - 1] * (1.0 - w) + self.density[i] * w
    }
}

/// Composite Simpson on a uniform grid; an odd interval count ends with a
/// 3/8-rule panel.
fn simpson(h: f64, y: &[f64]) -> f64 {
    let intervals = y.len() - 1;
    let (even, tail) = if intervals.is_multiple_of(2) {
        (intervals, 0.0)
    } else {
        let t = &y[intervals - 3..];
        (intervals - 3, 3.0 * h / 8.0 * (t[0] + 3.0 * t[1] + 3.0 * t[2] + t[3]))
    };
    let mut acc = y[0] + y[even];
    for (i, v) in y.iter().enumerate().take(even).skip(1) {
        acc += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    acc * h / 3.0 + tail
}

/// Tabulates and normalizes `π(δ | D₀, D)` over `𝒜` on a uniform grid.
pub fn normalize_delta_posterior<F>(
    ctx: &PowerPosteriorContext,
    log_prior_delta: F,
    grid_size: usize,
) -> Result<DeltaPosterior>
where
    F: Fn(f64) -> f64,
{
    if grid_size < 64 {
        return Err(PowerPriorError::InvalidConfig(format!(
            "grid_size = {grid_size} but at least 64 points are required"
        )));
    }
    let lo = ctx.feasible.search_lower(1e-6);
    let hi = ctx.feasible.upper;
    if !(lo < hi) {
        return Err(PowerPriorError::EmptyDomain);
    }
    let step = (hi - lo) / (grid_size - 1) as f64;
    let grid: Vec<f64> = (0..grid_size)
        .map(|i| if i + 1 == grid_size { hi } else { lo + i as f64 * step })
        .collect();
    let logs = grid
        .iter()
        .map(|&d| delta_log_posterior(d, ctx, &log_prior_delta))
        .collect::<Result<Vec<f64>>>()?;
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(PowerPriorError::EmptyDomain);
    }
    let unnorm: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let z = simpson(step, &unnorm);
    let density: Vec<f64> = unnorm.iter().map(|u| u / z).collect();
    let weighted: Vec<f64> = grid.iter().zip(&density).map(|(d, f)| d * f).collect();
    let mean = simpson(step, &weighted);
    let mode_idx = logs
        .iter()
        .enumerate()
        .fold(0, |best, (i, &l)| if l > logs[best] { i } else { best });
    Ok(DeltaPosterior {
        mode: grid[mode_idx],
        grid,
        density,
        log_normalizer: z.ln() + max,
        mean,
        feasible: ctx.feasible,
    })
}
