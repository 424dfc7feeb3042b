//! The initial-prior family
//!
//! ```text
//! π₀(β, σ²) ∝ (σ²)^(-t) exp{-[b + (k/2)(β - μ₀)' R (β - μ₀)] / σ²}
//! ```
//!
//! and the feasible set of the power parameter it induces.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{PowerPriorError, Result};
use crate::linalg::{chol_logdet, SpdFactor};
use crate::special::ln_gamma;

/// Evaluations closer than this to an open lower endpoint are rejected.
pub const BOUNDARY_GUARD: f64 = 1e-9;

/// A member of the `(t, b, k, μ₀, R)` family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub t: f64,
    pub b: f64,
    /// 0 drops the conditional normal factor on β, 1 keeps it.
    pub k: u8,
    /// Ignored when `k = 0`.
    pub mu0: DVector<f64>,
    /// Ignored when `k = 0`.
    pub r: DMatrix<f64>,
    pub label: String,
    /// When set (proper priors only), the density carries its normalizing
    /// constant so that `C(0) = 1`. Otherwise it is the bare kernel.
    #[serde(default)]
    pub normalized_initial_prior: bool,
}

impl PriorSpec {
    /// Fully validated construction of an arbitrary family member.
    pub fn custom(
        t: f64,
        b: f64,
        k: u8,
        mu0: DVector<f64>,
        r: DMatrix<f64>,
        label: impl Into<String>,
    ) -> Result<Self> {
        let spec = Self {
            t,
            b,
            k,
            mu0,
            r,
            label: label.into(),
            normalized_initial_prior: false,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t >= 0.0) || !self.t.is_finite() {
            return Err(PowerPriorError::InvalidHyperparameter(format!(
                "t = {} must be a finite non-negative number",
                self.t
            )));
        }
        if !(self.b >= 0.0) || !self.b.is_finite() {
            return Err(PowerPriorError::InvalidHyperparameter(format!(
                "b = {} must be a finite non-negative number",
                self.b
            )));
        }
        if self.k > 1 {
            return Err(PowerPriorError::InvalidHyperparameter(format!(
                "k = {} must be 0 or 1",
                self.k
            )));
        }
        if self.r.nrows() != self.mu0.len() || self.r.ncols() != self.mu0.len() {
            return Err(PowerPriorError::ShapeMismatch(format!(
                "R is {}x{} but mu0 has length {}",
                self.r.nrows(),
                self.r.ncols(),
                self.mu0.len()
            )));
        }
        if self.k == 1 {
            if self.mu0.iter().any(|v| !v.is_finite()) {
                return Err(PowerPriorError::InvalidHyperparameter(
                    "mu0 must be finite".into(),
                ));
            }
            let asym = (&self.r - self.r.transpose()).amax();
            if asym > 1e-12 * self.r.amax().max(1.0) {
                return Err(PowerPriorError::NotPositiveDefinite);
            }
            SpdFactor::new(&self.r)?;
        }
        if self.normalized_initial_prior && !self.is_proper() {
            return Err(PowerPriorError::InvalidHyperparameter(
                "only a proper prior can carry its normalizing constant".into(),
            ));
        }
        Ok(())
    }

    pub fn p(&self) -> usize {
        self.mu0.len()
    }

    /// Proper iff `t > 1 + p/2`, `b > 0` and `k = 1`.
    pub fn is_proper(&self) -> bool {
        self.t > 1.0 + self.p() as f64 / 2.0 && self.b > 0.0 && self.k == 1
    }

    pub fn with_normalization(mut self, on: bool) -> Result<Self> {
        self.normalized_initial_prior = on;
        self.validate()?;
        Ok(self)
    }

    /// Log normalizing constant of the proper member, i.e. of
    /// `N_p-Γ⁻¹(μ₀, R, t - p/2 - 1, b)`. Zero when the flag is off.
    pub fn log_normalizer(&self) -> f64 {
        if !self.normalized_initial_prior {
            return 0.0;
        }
        let p = self.p() as f64;
        let a = self.t - p / 2.0 - 1.0;
        let logdet_r = chol_logdet(&self.r).expect("validated R");
        0.5 * logdet_r - 0.5 * p * (2.0 * std::f64::consts::PI).ln() + a * self.b.ln()
            - ln_gamma(a)
    }

    /// `log π₀(β, σ²)` (kernel plus [`Self::log_normalizer`]).
    pub fn log_density(&self, beta: &DVector<f64>, sigma2: f64) -> f64 {
        let mut q = self.b;
        if self.k == 1 {
            let d = beta - &self.mu0;
            q += 0.5 * d.dot(&(&self.r * &d));
        }
        -self.t * sigma2.ln() - q / sigma2 + self.log_normalizer()
    }
}

/// `π₀ ∝ 1/σ²`: `t = 1`, `b = 0`, `k = 0`.
pub fn make_reference_prior(p: usize) -> PriorSpec {
    PriorSpec {
        t: 1.0,
        b: 0.0,
        k: 0,
        mu0: DVector::zeros(p),
        r: DMatrix::identity(p, p),
        label: "reference".into(),
        normalized_initial_prior: false,
    }
}

/// Zellner's g-prior: `t = 1 + p/2`, `b = 0`, `k = 1`, `R = X'X / g`.
pub fn make_zellner_g_prior(g: f64, xtx: &DMatrix<f64>, mu0: DVector<f64>) -> Result<PriorSpec> {
    if !(g > 0.0) || !g.is_finite() {
        return Err(PowerPriorError::InvalidHyperparameter(format!(
            "g = {g} must be positive"
        )));
    }
    SpdFactor::new(xtx)?;
    let p = xtx.nrows();
    PriorSpec::custom(1.0 + p as f64 / 2.0, 0.0, 1, mu0, xtx / g, format!("zellner(g={g})"))
}

/// Proper conjugate `N_p-Γ⁻¹(μ₀, R, a, b)`: `t = a + p/2 + 1`, `k = 1`.
pub fn make_nig_prior(mu0: DVector<f64>, r: DMatrix<f64>, a: f64, b: f64) -> Result<PriorSpec> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(PowerPriorError::InvalidHyperparameter(format!(
            "a = {a} must be positive"
        )));
    }
    if !(b > 0.0) || !b.is_finite() {
        return Err(PowerPriorError::InvalidHyperparameter(format!(
            "b = {b} must be positive"
        )));
    }
    let p = mu0.len();
    PriorSpec::custom(a + p as f64 / 2.0 + 1.0, b, 1, mu0, r, format!("nig(a={a},b={b})"))
}

/// Interval of admissible power parameters; always a sub-interval of `[0, 1]`
/// with closed upper endpoint 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibleSet {
    pub lower: f64,
    pub lower_open: bool,
    pub upper: f64,
    pub upper_open: bool,
    pub includes_zero: bool,
}

impl FeasibleSet {
    /// Exact membership.
    pub fn contains(&self, delta: f64) -> bool {
        if !(delta <= self.upper) {
            return false;
        }
        if delta == 0.0 && self.includes_zero {
            return true;
        }
        if self.lower_open {
            delta > self.lower
        } else {
            delta >= self.lower
        }
    }

    /// Membership with the numerical guard at an open lower endpoint.
    pub fn admits(&self, delta: f64) -> bool {
        if self.lower_open && delta <= self.lower + BOUNDARY_GUARD {
            return false;
        }
        self.contains(delta)
    }

    /// True when the bound `(2 - 2t + p)/n₀` reaches past 1.
    pub fn is_empty(&self) -> bool {
        self.lower > self.upper || (self.lower == self.upper && self.lower_open)
    }

    /// Smallest δ a numerical search may evaluate: the closed lower endpoint,
    /// or `lower + eps` for an open one.
    pub fn search_lower(&self, eps: f64) -> f64 {
        if self.lower_open {
            self.lower + eps
        } else {
            self.lower
        }
    }
}

/// `𝒜 = {δ ∈ [0, 1] : δ > (2 - 2t + p)/n₀}`, plus `δ = 0` for proper priors.
pub fn feasible_set(prior: &PriorSpec, n0: usize, p: usize) -> Result<FeasibleSet> {
    if n0 <= p {
        return Err(PowerPriorError::InsufficientHistoricalData { n0, p });
    }
    if prior.p() != p {
        return Err(PowerPriorError::ShapeMismatch(format!(
            "prior has dimension {} but the design has p = {p}",
            prior.p()
        )));
    }
    let bound = (2.0 - 2.0 * prior.t + p as f64) / n0 as f64;
    let lower = bound.max(0.0);
    let includes_zero = prior.is_proper();
    Ok(FeasibleSet {
        lower,
        lower_open: lower > 0.0 || !includes_zero,
        upper: 1.0,
        upper_open: false,
        includes_zero,
    })
}

/// Which design's `X'X` seeds a Zellner prior.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum XtxSource {
    #[default]
    Current,
    Historical,
}

/// JSON prior configuration, e.g. `{"kind": "zellner", "g": 100, "xtx_source": "current"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PriorConfig {
    Reference,
    Zellner {
        g: f64,
        #[serde(default)]
        xtx_source: XtxSource,
        #[serde(default)]
        mu0: Option<Vec<f64>>,
    },
    Nig {
        mu0: Vec<f64>,
        r: Vec<Vec<f64>>,
        a: f64,
        b: f64,
        #[serde(default)]
        normalized: bool,
    },
    Custom {
        t: f64,
        b: f64,
        k: u8,
        #[serde(default)]
        mu0: Option<Vec<f64>>,
        #[serde(default)]
        r: Option<Vec<Vec<f64>>>,
        #[serde(default)]
        normalized: bool,
    },
}

fn matrix_from_rows(rows: &[Vec<f64>], p: usize) -> Result<DMatrix<f64>> {
    if rows.len() != p || rows.iter().any(|r| r.len() != p) {
        return Err(PowerPriorError::ShapeMismatch(format!(
            "R must be {p}x{p}"
        )));
    }
    Ok(DMatrix::from_fn(p, p, |i, j| rows[i][j]))
}

fn vector_or_zero(v: &Option<Vec<f64>>, p: usize) -> Result<DVector<f64>> {
    match v {
        None => Ok(DVector::zeros(p)),
        Some(v) if v.len() == p => Ok(DVector::from_column_slice(v)),
        Some(v) => Err(PowerPriorError::ShapeMismatch(format!(
            "mu0 has length {} but p = {p}",
            v.len()
        ))),
    }
}

impl PriorConfig {
    /// Builds the prior for dimension `p`; the Zellner variant draws `X'X`
    /// from the design named by `xtx_source`.
    pub fn resolve(
        &self,
        p: usize,
        xtx_current: &DMatrix<f64>,
        xtx_historical: &DMatrix<f64>,
    ) -> Result<PriorSpec> {
        match self {
            PriorConfig::Reference => Ok(make_reference_prior(p)),
            PriorConfig::Zellner { g, xtx_source, mu0 } => {
                let xtx = match xtx_source {
                    XtxSource::Current => xtx_current,
                    XtxSource::Historical => xtx_historical,
                };
                make_zellner_g_prior(*g, xtx, vector_or_zero(mu0, p)?)
            }
            PriorConfig::Nig {
                mu0,
                r,
                a,
                b,
                normalized,
            } => {
                let mu0 = vector_or_zero(&Some(mu0.clone()), p)?;
                make_nig_prior(mu0, matrix_from_rows(r, p)?, *a, *b)?.with_normalization(*normalized)
            }
            PriorConfig::Custom {
                t,
                b,
                k,
                mu0,
                r,
                normalized,
            } => {
                let r = match r {
                    Some(rows) => matrix_from_rows(rows, p)?,
                    None => DMatrix::identity(p, p),
                };
                PriorSpec::custom(*t, *b, *k, vector_or_zero(mu0, p)?, r, "custom")?
                    .with_normalization(*normalized)
            }
        }
    }
}
