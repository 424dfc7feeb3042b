//! The intercept-only δ-vs-discrepancy study and the regression study.

use std::fmt::Write as _;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{stats_from_summary, sufficient_stats, Dataset, GaussianSuffStats};
use crate::error::{PowerPriorError, Result};
use crate::posterior::{posterior, PowerPosteriorContext};
use crate::prior::{make_reference_prior, PriorSpec};
use crate::selection::{select_delta, CriterionKind};

/// Grid points and golden-section tolerance used for every selection.
pub const SELECTION_GRID: usize = 256;
pub const SELECTION_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    /// Marginal likelihood under the reference prior.
    EB1,
    /// Marginal likelihood under the vague conditional-normal prior.
    EB2,
    /// DIC under the reference prior.
    DIC,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::EB1, Method::EB2, Method::DIC];

    pub fn name(self) -> &'static str {
        match self {
            Method::EB1 => "EB1",
            Method::EB2 => "EB2",
            Method::DIC => "DIC",
        }
    }

    pub fn criterion(self) -> CriterionKind {
        match self {
            Method::EB1 | Method::EB2 => CriterionKind::MarginalLikelihood,
            Method::DIC => CriterionKind::Dic,
        }
    }

    pub fn prior(self, p: usize) -> PriorSpec {
        match self {
            Method::EB1 | Method::DIC => make_reference_prior(p),
            Method::EB2 => vague_normal_prior(p),
        }
    }
}

impl std::str::FromStr for Method {
    type Err = PowerPriorError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "EB1" => Ok(Method::EB1),
            "EB2" => Ok(Method::EB2),
            "DIC" => Ok(Method::DIC),
            other => Err(PowerPriorError::InvalidConfig(format!("unknown method {other:?}"))),
        }
    }
}

/// `β | σ² ~ N(0, 10⁴σ² I)` with `π(σ²) ∝ 1/σ²`.
pub fn vague_normal_prior(p: usize) -> PriorSpec {
    PriorSpec {
        t: 1.0 + p as f64 / 2.0,
        b: 0.0,
        k: 1,
        mu0: DVector::zeros(p),
        r: DMatrix::identity(p, p) * 1e-4,
        label: "vague-normal".into(),
        normalized_initial_prior: false,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig1Config {
    pub n: usize,
    pub n0: usize,
    pub s: f64,
    pub s0: f64,
    pub ybar: f64,
    pub discrepancy_grid: Vec<f64>,
    pub methods: Vec<Method>,
}

impl Default for Fig1Config {
    fn default() -> Self {
        Self {
            n: 10,
            n0: 10,
            s: 0.5,
            s0: 0.5,
            ybar: 0.0,
            discrepancy_grid: (0..=30).map(|i| i as f64 * 0.05).collect(),
            methods: Method::ALL.to_vec(),
        }
    }
}

impl Fig1Config {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.n0 < 2 {
            return Err(PowerPriorError::InvalidConfig("n and n0 must be at least 2".into()));
        }
        check_grid(&self.discrepancy_grid)?;
        check_methods(&self.methods)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig2Config {
    pub beta_current: Vec<f64>,
    pub beta04_grid: Vec<f64>,
    pub n: usize,
    pub n0: usize,
    pub sigma: f64,
    pub replicates: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    /// Rayon threads; 0 uses the global pool. Results do not depend on it.
    #[serde(default)]
    pub workers: usize,
}

impl Default for Fig2Config {
    fn default() -> Self {
        Self {
            beta_current: vec![1.0; 4],
            beta04_grid: (0..9).map(|i| 1.0 + 0.25 * i as f64).collect(),
            n: 20,
            n0: 20,
            sigma: 1.0,
            replicates: 200,
            seed: 20_240_601,
            methods: Method::ALL.to_vec(),
            workers: 0,
        }
    }
}

impl Fig2Config {
    pub fn validate(&self) -> Result<()> {
        let p = self.beta_current.len();
        if p < 2 {
            return Err(PowerPriorError::InvalidConfig("beta_current needs an intercept and a slope".into()));
        }
        if self.n <= p || self.n0 <= p {
            return Err(PowerPriorError::InvalidConfig(format!(
                "n = {} and n0 = {} must both exceed p = {p}",
                self.n, self.n0
            )));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(PowerPriorError::InvalidConfig(format!("sigma = {} must be positive", self.sigma)));
        }
        if self.replicates == 0 {
            return Err(PowerPriorError::InvalidConfig("replicates must be at least 1".into()));
        }
        if self.beta04_grid.len() as u64 > u32::MAX as u64 || self.replicates as u64 > u32::MAX as u64 {
            return Err(PowerPriorError::InvalidConfig("grid or replicate count too large".into()));
        }
        check_grid(&self.beta04_grid)?;
        check_methods(&self.methods)
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() || grid.iter().any(|v| !v.is_finite()) {
        return Err(PowerPriorError::InvalidConfig("grid must be non-empty and finite".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(PowerPriorError::InvalidConfig("grid must be strictly ascending".into()));
    }
    Ok(())
}

fn check_methods(methods: &[Method]) -> Result<()> {
    if methods.is_empty() {
        return Err(PowerPriorError::InvalidConfig("at least one method is required".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimRecord {
    /// Discrepancy `ȳ₀ - ȳ` or `β₀₄ - β₄`.
    pub cell: f64,
    pub method: Method,
    pub mean_delta: f64,
    /// Absent for the intercept-only study.
    pub log_mse: Option<f64>,
    pub replicates: usize,
    pub failures: usize,
    pub elapsed_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub study: String,
    pub records: Vec<SimRecord>,
}

impl SimResult {
    /// `cell,method,mean_delta,log_mse,replicates,failures`; timing is left out
    /// so that files from equal runs compare equal.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("cell,method,mean_delta,log_mse,replicates,failures\n");
        for r in &self.records {
            let mse = r.log_mse.map(|v| format!("{v:?}")).unwrap_or_default();
            let _ = writeln!(
                out,
                "{:?},{},{:?},{},{},{}",
                r.cell,
                r.method.name(),
                r.mean_delta,
                mse,
                r.replicates,
                r.failures
            );
        }
        out
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("records serialize")
    }

    pub fn get(&self, cell_index: usize, method: Method) -> Option<&SimRecord> {
        self.records.iter().filter(|r| r.method == method).nth(cell_index)
    }

    pub fn curve(&self, method: Method) -> Vec<&SimRecord> {
        self.records.iter().filter(|r| r.method == method).collect()
    }
}

fn generate_with_rng(beta: &[f64], sigma: f64, n: usize, rng: &mut ChaCha20Rng) -> Result<Dataset> {
    let p = beta.len();
    if p == 0 || n <= p {
        return Err(PowerPriorError::ShapeMismatch(format!("need n > p, got n = {n}, p = {p}")));
    }
    if !(sigma >= 0.0) {
        return Err(PowerPriorError::InvalidConfig(format!("sigma = {sigma} must be non-negative")));
    }
    let mut x = DMatrix::from_element(n, p, 1.0);
    for i in 0..n {
        for j in 1..p {
            x[(i, j)] = rng.gen::<f64>();
        }
    }
    let b = DVector::from_column_slice(beta);
    let mut y = &x * b;
    for v in y.iter_mut() {
        let e: f64 = rng.sample(StandardNormal);
        *v += sigma * e;
    }
    Dataset::new(x, y)
}

/// Intercept plus `p - 1` uniform(0, 1) covariates and N(0, σ²) noise.
pub fn generate_linear_data(beta: &[f64], sigma: f64, n: usize, seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    generate_with_rng(beta, sigma, n, &mut rng)
}

/// Generator for replicate `rep` of cell `cell`: one ChaCha20 stream each.
pub fn replicate_rng(seed: u64, cell: usize, rep: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(((cell as u64) << 32) | rep as u64);
    rng
}

fn select(method: Method, stats0: &GaussianSuffStats, stats: &GaussianSuffStats) -> Result<(f64, PowerPosteriorContext)> {
    let ctx = PowerPosteriorContext::new(method.prior(stats.p), stats0.clone(), stats.clone())?;
    let prof = select_delta(method.criterion(), &ctx, SELECTION_GRID, SELECTION_TOL)?;
    Ok((prof.selected, ctx))
}

pub fn run_fig1(cfg: &Fig1Config) -> Result<SimResult> {
    cfg.validate()?;
    let stats = stats_from_summary(cfg.n, cfg.ybar, cfg.s)?;
    let mut records = Vec::new();
    for &method in &cfg.methods {
        for &d in &cfg.discrepancy_grid {
            let start = Instant::now();
            let stats0 = stats_from_summary(cfg.n0, cfg.ybar + d, cfg.s0)?;
            let (delta, _) = select(method, &stats0, &stats)?;
            records.push(SimRecord {
                cell: d,
                method,
                mean_delta: delta,
                log_mse: None,
                replicates: 1,
                failures: 0,
                elapsed_secs: start.elapsed().as_secs_f64(),
            });
        }
    }
    Ok(SimResult {
        study: "fig1".into(),
        records,
    })
}

/// Selected δ and squared error of the last coefficient, per method.
type ReplicateOutcome = Vec<Option<(f64, f64)>>;

fn fig2_replicate(cfg: &Fig2Config, cell: usize, rep: usize) -> Result<ReplicateOutcome> {
    let p = cfg.beta_current.len();
    let mut beta0 = cfg.beta_current.clone();
    beta0[p - 1] = cfg.beta04_grid[cell];
    let mut rng = replicate_rng(cfg.seed, cell, rep);
    let cur = sufficient_stats(&generate_with_rng(&cfg.beta_current, cfg.sigma, cfg.n, &mut rng)?)?;
    let hist = sufficient_stats(&generate_with_rng(&beta0, cfg.sigma, cfg.n0, &mut rng)?)?;
    let truth = cfg.beta_current[p - 1];
    Ok(cfg
        .methods
        .iter()
        .map(|&m| {
            let (delta, ctx) = select(m, &hist, &cur).ok()?;
            let post = posterior(delta, &ctx).ok()?;
            Some((delta, (post.location[p - 1] - truth).powi(2)))
        })
        .collect())
}

fn run_fig2_inner(cfg: &Fig2Config) -> Result<SimResult> {
    let p = cfg.beta_current.len();
    let mut records = Vec::new();
    for cell in 0..cfg.beta04_grid.len() {
        let start = Instant::now();
        let outcomes: Vec<ReplicateOutcome> = (0..cfg.replicates)
            .into_par_iter()
            .map(|rep| fig2_replicate(cfg, cell, rep))
            .collect::<Result<_>>()?;
        let elapsed = start.elapsed().as_secs_f64();
        for (mi, &method) in cfg.methods.iter().enumerate() {
            let ok: Vec<(f64, f64)> = outcomes.iter().filter_map(|o| o[mi]).collect();
            let count = ok.len();
            let (mean_delta, log_mse) = if count == 0 {
                (f64::NAN, None)
            } else {
                let c = count as f64;
                (
                    ok.iter().map(|o| o.0).sum::<f64>() / c,
                    Some((ok.iter().map(|o| o.1).sum::<f64>() / c).ln()),
                )
            };
            records.push(SimRecord {
                cell: cfg.beta04_grid[cell] - cfg.beta_current[p - 1],
                method,
                mean_delta,
                log_mse,
                replicates: count,
                failures: cfg.replicates - count,
                elapsed_secs: elapsed,
            });
        }
    }
    Ok(SimResult {
        study: "fig2".into(),
        records,
    })
}

/// Replicates run in parallel and are reduced in (cell, replicate) order, so
/// the result is the same for every worker count.
pub fn run_fig2(cfg: &Fig2Config) -> Result<SimResult> {
    cfg.validate()?;
    if cfg.workers == 0 {
        return run_fig2_inner(cfg);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| PowerPriorError::InvalidConfig(e.to_string()))?;
    pool.install(|| run_fig2_inner(cfg))
}
