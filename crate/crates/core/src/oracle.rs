//! Brute-force verifiers for the closed forms.
//!
//! Nothing here calls the closed-form routines it is meant to check: the
//! quadratures integrate prior × likelihood directly, the Monte-Carlo DIC
//! averages the deviance over posterior draws, and the pooled posterior is a
//! single conjugate update with explicit matrix inversion.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::GaussianSuffStats;
use crate::error::{PowerPriorError, Result};
use crate::linalg::quad_form;
use crate::posterior::{posterior, sample_posterior, NigPosterior, PowerPosteriorContext};
use crate::prior::PriorSpec;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Growth per range doubling above which the σ² tail counts as non-decaying.
const DIVERGENCE_GROWTH: f64 = 0.01;
const MAX_DOUBLINGS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    /// Half-width of the β window in conditional standard deviations.
    pub beta_halfwidth: f64,
    /// Initial `log σ²` window, relative to `log(S₀/n₀)`.
    pub sigma2_log_range: (f64, f64),
    /// Trapezoid nodes per axis on the initial window.
    pub points_per_axis: usize,
    /// Convergence target for range doubling.
    pub target_rel_err: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            beta_halfwidth: 12.0,
            sigma2_log_range: (-12.0, 12.0),
            points_per_axis: 2048,
            target_rel_err: 1e-7,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.points_per_axis < 256 {
            return Err(PowerPriorError::InvalidConfig(format!(
                "points_per_axis = {} must be at least 256",
                self.points_per_axis
            )));
        }
        if !(self.target_rel_err >= 1e-10) {
            return Err(PowerPriorError::InvalidConfig(format!(
                "target_rel_err = {} must be at least 1e-10",
                self.target_rel_err
            )));
        }
        let (lo, hi) = self.sigma2_log_range;
        if !(lo < 0.0 && hi > 0.0) || !(self.beta_halfwidth > 0.0) {
            return Err(PowerPriorError::InvalidConfig(
                "windows must be non-degenerate and straddle the centre".into(),
            ));
        }
        Ok(())
    }
}

/// Scalar (p = 1) view of a likelihood term.
#[derive(Debug, Clone, Copy)]
struct ScalarLik {
    xtx: f64,
    beta_hat: f64,
    s: f64,
    n: f64,
    power: f64,
}

impl ScalarLik {
    fn from_stats(st: &GaussianSuffStats, power: f64) -> Result<Self> {
        if st.p != 1 {
            return Err(PowerPriorError::UnsupportedDimension(st.p));
        }
        Ok(Self {
            xtx: st.xtx[(0, 0)],
            beta_hat: st.beta_hat[0],
            s: st.s,
            n: st.n as f64,
            power,
        })
    }

    /// `power · log L(β, σ²)` with `L = (2πσ²)^{-n/2} exp{-[S + X'X(β-β̂)²]/(2σ²)}`.
    #[inline]
    fn log_powered(&self, beta: f64, ln_s2: f64, inv_s2: f64) -> f64 {
        if self.power == 0.0 {
            return 0.0;
        }
        let d = beta - self.beta_hat;
        self.power * (-0.5 * self.n * (LN_2PI + ln_s2) - 0.5 * (self.s + self.xtx * d * d) * inv_s2)
    }
}

#[derive(Debug, Clone, Copy)]
struct ScalarPrior {
    t: f64,
    b: f64,
    k: f64,
    mu0: f64,
    r: f64,
    log_norm: f64,
}

impl ScalarPrior {
    fn new(prior: &PriorSpec) -> Result<Self> {
        if prior.p() != 1 {
            return Err(PowerPriorError::UnsupportedDimension(prior.p()));
        }
        Ok(Self {
            t: prior.t,
            b: prior.b,
            k: prior.k as f64,
            mu0: prior.mu0[0],
            r: prior.r[(0, 0)],
            log_norm: prior.log_normalizer(),
        })
    }

    #[inline]
    fn log_density(&self, beta: f64, ln_s2: f64, inv_s2: f64) -> f64 {
        let d = beta - self.mu0;
        -self.t * ln_s2 - (self.b + 0.5 * self.k * self.r * d * d) * inv_s2 + self.log_norm
    }
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + xs.map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// `log ∫∫ π₀(β, σ²) Π L_i(β, σ²)^{power_i} dβ dσ²` for p = 1.
///
/// β is integrated on `centre ± W·sqrt(σ²/precision)` for each σ², and σ² on a
/// `log σ²` grid whose range is doubled until the estimate settles.
fn log_integral_2d(prior: &ScalarPrior, liks: &[ScalarLik], u_centre: f64, cfg: &QuadratureConfig) -> Result<f64> {
    cfg.validate()?;
    let precision: f64 = prior.k * prior.r + liks.iter().map(|l| l.power * l.xtx).sum::<f64>();
    if !(precision > 0.0) {
        // flat in β
        return Err(PowerPriorError::Divergent);
    }
    let centre = (prior.k * prior.r * prior.mu0 + liks.iter().map(|l| l.power * l.xtx * l.beta_hat).sum::<f64>())
        / precision;

    let m = cfg.points_per_axis;
    let w = cfg.beta_halfwidth;
    let hz = 2.0 * w / (m - 1) as f64;
    let zs: Vec<f64> = (0..m).map(|j| -w + j as f64 * hz).collect();
    let (lo, hi) = cfg.sigma2_log_range;
    let hu = (hi - lo) / (m - 1) as f64;

    let row = |u: f64| -> f64 {
        let s2 = u.exp();
        let inv = 1.0 / s2;
        let sd = (s2 / precision).sqrt();
        let vals = zs.iter().enumerate().map(|(j, &z)| {
            let beta = centre + z * sd;
            let mut l = prior.log_density(beta, u, inv);
            for lk in liks {
                l += lk.log_powered(beta, u, inv);
            }
            if j == 0 || j + 1 == m {
                l - std::f64::consts::LN_2
            } else {
                l
            }
        });
        // dβ = sd dz, dσ² = σ² du
        log_sum_exp(vals) + (sd * hz).ln() + u
    };

    // Rows are indexed from the centre so doubling only adds new rows.
    let i_lo = (lo / hu).round() as i64;
    let i_hi = (hi / hu).round() as i64;
    let mut rows: std::collections::BTreeMap<i64, f64> = std::collections::BTreeMap::new();
    let fill = |a: i64, b: i64, rows: &mut std::collections::BTreeMap<i64, f64>| {
        let missing: Vec<i64> = (a..=b).filter(|i| !rows.contains_key(i)).collect();
        let vals: Vec<(i64, f64)> = missing
            .par_iter()
            .map(|&i| (i, row(u_centre + i as f64 * hu)))
            .collect();
        rows.extend(vals);
    };
    let estimate = |a: i64, b: i64, rows: &std::collections::BTreeMap<i64, f64>| -> f64 {
        let it = rows
            .range(a..=b)
            .map(|(&i, &v)| if i == a || i == b { v - std::f64::consts::LN_2 } else { v });
        log_sum_exp(it) + hu.ln()
    };

    let (mut a, mut b) = (i_lo, i_hi);
    fill(a, b, &mut rows);
    let mut prev = estimate(a, b, &rows);
    let mut growth_streak = 0;
    for _ in 0..MAX_DOUBLINGS {
        a *= 2;
        b *= 2;
        fill(a, b, &mut rows);
        let next = estimate(a, b, &rows);
        if !next.is_finite() {
            return Err(PowerPriorError::Divergent);
        }
        let rel = (next - prev).exp_m1();
        if rel.abs() < cfg.target_rel_err {
            return Ok(next);
        }
        if rel > DIVERGENCE_GROWTH {
            growth_streak += 1;
            if growth_streak >= 2 {
                return Err(PowerPriorError::Divergent);
            }
        } else {
            growth_streak = 0;
        }
        prev = next;
    }
    Err(PowerPriorError::Divergent)
}

fn u_centre(stats0: &GaussianSuffStats) -> f64 {
    let v = stats0.s / stats0.n as f64;
    if v > 0.0 {
        v.ln()
    } else {
        0.0
    }
}

/// `log C(δ)` by 2-D quadrature (p = 1), or `Divergent` when the σ² tail
/// keeps growing under range doubling.
pub fn c_delta_quadrature(delta: f64, prior: &PriorSpec, stats0: &GaussianSuffStats, cfg: &QuadratureConfig) -> Result<f64> {
    let hist = ScalarLik::from_stats(stats0, delta)?;
    let pr = ScalarPrior::new(prior)?;
    log_integral_2d(&pr, &[hist], u_centre(stats0), cfg)
}

/// `log m(δ)` as the ratio of two quadratures: `∫ L(D) L(D₀)^δ π₀` over `C(δ)`.
pub fn marginal_lik_quadrature(delta: f64, ctx: &PowerPosteriorContext, cfg: &QuadratureConfig) -> Result<f64> {
    let hist = ScalarLik::from_stats(&ctx.stats0, delta)?;
    let cur = ScalarLik::from_stats(&ctx.stats, 1.0)?;
    let pr = ScalarPrior::new(&ctx.prior)?;
    let centre = u_centre(&ctx.stats0);
    let num = log_integral_2d(&pr, &[hist, cur], centre, cfg)?;
    let den = log_integral_2d(&pr, &[hist], centre, cfg)?;
    Ok(num - den)
}

/// Monte-Carlo DIC, `n log 2π` omitted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloDic {
    pub dic: f64,
    pub dic_std_error: f64,
    pub p_d: f64,
    pub p_d_std_error: f64,
    pub expected_deviance: f64,
    pub deviance_at_mean: f64,
}

/// `-2 log L(β, σ² | D) - n log 2π` from sufficient statistics.
fn deviance(st: &GaussianSuffStats, beta: &nalgebra::DVector<f64>, sigma2: f64) -> f64 {
    let d = beta - &st.beta_hat;
    st.n as f64 * sigma2.ln() + (st.s + quad_form(&st.xtx, &d)) / sigma2
}

/// Jackknife standard error of a sample mean.
fn jackknife_se(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let sum: f64 = xs.iter().sum();
    let loo: Vec<f64> = xs.iter().map(|x| (sum - x) / (n - 1.0)).collect();
    let mean_loo = loo.iter().sum::<f64>() / n;
    ((n - 1.0) / n * loo.iter().map(|v| (v - mean_loo).powi(2)).sum::<f64>()).sqrt()
}

/// DIC from posterior draws: `2·E[Dev] - Dev(E[β], E[σ²])`.
pub fn dic_monte_carlo(delta: f64, ctx: &PowerPosteriorContext, n_draws: usize, seed: u64) -> Result<MonteCarloDic> {
    if n_draws < 10_000 {
        return Err(PowerPriorError::InvalidConfig(format!(
            "n_draws = {n_draws} but at least 10^4 draws are required"
        )));
    }
    let post = posterior(delta, ctx)?;
    if !(post.shape > 1.0) {
        return Err(PowerPriorError::MomentUndefined { shape: post.shape });
    }
    let draws = sample_posterior(&post, n_draws, seed)?;
    let devs: Vec<f64> = draws.iter().map(|d| deviance(&ctx.stats, &d.beta, d.sigma2)).collect();
    let expected = devs.iter().sum::<f64>() / devs.len() as f64;
    let se = jackknife_se(&devs);
    let at_mean = deviance(&ctx.stats, &post.location, post.scale / (post.shape - 1.0));
    Ok(MonteCarloDic {
        dic: 2.0 * expected - at_mean,
        dic_std_error: 2.0 * se,
        p_d: expected - at_mean,
        p_d_std_error: se,
        expected_deviance: expected,
        deviance_at_mean: at_mean,
    })
}

/// Single conjugate update of `prior` with all data in one likelihood.
pub fn pooled_conjugate_posterior(prior: &PriorSpec, pooled: &GaussianSuffStats) -> Result<NigPosterior> {
    let improper = |reason: &str| PowerPriorError::ImproperPosterior {
        delta: 1.0,
        reason: reason.into(),
    };
    let k = prior.k as f64;
    let p = pooled.p as f64;
    let precision: DMatrix<f64> = &pooled.xtx + &prior.r * k;
    let inv = precision
        .clone()
        .try_inverse()
        .ok_or_else(|| improper("precision is singular"))?;
    let location = &inv * (&pooled.xty + &prior.r * &prior.mu0 * k);
    let shape = pooled.n as f64 / 2.0 + prior.t - 1.0 - p / 2.0;
    let scale = prior.b
        + 0.5 * (k * quad_form(&prior.r, &prior.mu0) + pooled.yty() - quad_form(&precision, &location));
    if !(shape > 0.0) || !(scale > 0.0) {
        return Err(improper("shape or scale is not positive"));
    }
    Ok(NigPosterior {
        location,
        precision,
        shape,
        scale,
    })
}

// 15-point Kronrod nodes/weights and the embedded 7-point Gauss weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Adaptive Gauss–Kronrod (7/15) quadrature by recursive bisection.
pub fn adaptive_gauss_kronrod<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> f64 {
    fn recurse<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: usize) -> f64 {
        let (v, err) = gk15(f, a, b);
        if err <= tol || depth == 0 {
            return v;
        }
        let m = 0.5 * (a + b);
        recurse(f, a, m, tol / 2.0, depth - 1) + recurse(f, m, b, tol / 2.0, depth - 1)
    }
    let (rough, _) = gk15(&f, a, b);
    let tol = abs_tol.max(rel_tol * rough.abs());
    recurse(&f, a, b, tol, 40)
}
