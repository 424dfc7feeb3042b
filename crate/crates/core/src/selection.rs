//! Selection of the power parameter.
//!
//! Empirical Bayes maximizes `log m(δ)` over the interior of the feasible
//! set. DIC minimizes the closed-form DIC over `[ε, 1]` (or from the
//! smallest δ with `ν > 1`); fixed-δ posteriors below the feasibility bound
//! are admissible there. Both use a uniform grid scan followed by
//! golden-section refinement of the bracketing cell.

use serde::{Deserialize, Serialize};

use crate::error::{PowerPriorError, Result};
use crate::posterior::{dic, log_marginal_likelihood, PowerPosteriorContext};

/// Interior clip at an open lower endpoint of the feasible set.
pub const EB_EPS: f64 = 1e-6;
/// Lower clip for the DIC search.
pub const DIC_EPS: f64 = 1e-6;
/// Margin above `ν = 1` when the DIC domain is cut by posterior propriety.
pub const DIC_SHAPE_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriterionKind {
    MarginalLikelihood,
    Dic,
}

impl CriterionKind {
    pub fn maximizes(self) -> bool {
        matches!(self, CriterionKind::MarginalLikelihood)
    }

    pub fn name(self) -> &'static str {
        match self {
            CriterionKind::MarginalLikelihood => "marginal_likelihood",
            CriterionKind::Dic => "dic",
        }
    }
}

/// A criterion together with the δ-domain it is searched over.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionCriterion {
    pub kind: CriterionKind,
    pub lower: f64,
    pub upper: f64,
}

impl SelectionCriterion {
    pub fn new(kind: CriterionKind, ctx: &PowerPosteriorContext) -> Result<Self> {
        let fs = &ctx.feasible;
        let lower = match kind {
            CriterionKind::MarginalLikelihood => {
                if fs.is_empty() {
                    return Err(PowerPriorError::EmptyDomain);
                }
                fs.search_lower(EB_EPS)
            }
            CriterionKind::Dic => {
                // ν(δ) = (n₀δ - p)/2 + t - 1 + n/2 is linear in δ.
                let n0 = ctx.stats0.n as f64;
                let base = -(ctx.p() as f64) / 2.0 + ctx.prior.t - 1.0 + ctx.stats.n as f64 / 2.0;
                let nu_at = |d: f64| n0 * d / 2.0 + base;
                if nu_at(DIC_EPS) > 1.0 {
                    DIC_EPS
                } else {
                    2.0 * (1.0 + DIC_SHAPE_MARGIN - base) / n0
                }
            }
        };
        if !(lower < 1.0) {
            return Err(PowerPriorError::EmptyDomain);
        }
        Ok(Self {
            kind,
            lower,
            upper: 1.0,
        })
    }

    /// Criterion value in natural units (`log m` or DIC); `None` where the
    /// objective is undefined.
    pub fn evaluate(&self, delta: f64, ctx: &PowerPosteriorContext) -> Option<f64> {
        let v = match self.kind {
            CriterionKind::MarginalLikelihood => log_marginal_likelihood(delta, ctx).ok()?,
            CriterionKind::Dic => dic(delta, ctx).ok()?.dic,
        };
        v.is_finite().then_some(v)
    }
}

/// A criterion tabulated over δ, with the selected value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaProfile {
    pub criterion: CriterionKind,
    pub grid: Vec<f64>,
    /// `None` where `feasible_mask` is false.
    pub values: Vec<Option<f64>>,
    pub feasible_mask: Vec<bool>,
    pub selected: f64,
    pub selected_value: f64,
}

impl DeltaProfile {
    /// Rows `delta,value,feasible`; infeasible values are left empty.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("delta,value,feasible\n");
        for ((d, v), m) in self.grid.iter().zip(&self.values).zip(&self.feasible_mask) {
            let v = v.map(|v| format!("{v:?}")).unwrap_or_default();
            out.push_str(&format!("{d:?},{v},{m}\n"));
        }
        out
    }
}

fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|i| if i + 1 == n { hi } else { lo + i as f64 * step })
        .collect()
}

/// Outcome of [`maximize_on_interval`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScanResult {
    pub grid: Vec<f64>,
    pub values: Vec<Option<f64>>,
    pub argmax: f64,
    pub max: f64,
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

fn golden_section_max<F>(f: &F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64)
where
    F: Fn(f64) -> Option<f64>,
{
    let eval = |x: f64| f(x).unwrap_or(f64::NEG_INFINITY);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (eval(c), eval(d));
    while b - a > tol {
        // ties go left: less borrowing
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = eval(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = eval(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Grid scan of `objective` on `[lo, hi]`, then golden-section refinement
/// inside the cells adjacent to the best grid point until the bracket is
/// narrower than `tol`. Among grid points tied with the best value the
/// smallest δ wins, and the refined point replaces the grid optimum only if
/// it is at least as good.
pub fn maximize_on_interval<F>(objective: F, lo: f64, hi: f64, grid_size: usize, tol: f64) -> Result<ScanResult>
where
    F: Fn(f64) -> Option<f64>,
{
    if grid_size < 2 || !(lo < hi) {
        return Err(PowerPriorError::InvalidConfig(format!(
            "need at least two grid points on a non-empty interval (got {grid_size} on [{lo}, {hi}])"
        )));
    }
    let grid = uniform_grid(lo, hi, grid_size);
    let values: Vec<Option<f64>> = grid.iter().map(|&d| objective(d).filter(|v| v.is_finite())).collect();
    let best = values
        .iter()
        .flatten()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    if !best.is_finite() {
        return Err(PowerPriorError::EmptyDomain);
    }
    let tie = 1e-12 * best.abs().max(1.0);
    let i = values
        .iter()
        .position(|v| v.is_some_and(|v| v >= best - tie))
        .expect("finite best exists");
    let a = grid[i.saturating_sub(1)];
    let b = grid[(i + 1).min(grid.len() - 1)];
    let (x, fx) = golden_section_max(&objective, a, b, tol);
    let (argmax, max) = if fx > values[i].unwrap() {
        (x, fx)
    } else {
        (grid[i], values[i].unwrap())
    };
    Ok(ScanResult {
        grid,
        values,
        argmax,
        max,
    })
}

/// Selects δ by the given criterion. `grid_size ≥ 32`, `tol ≤ 1e-4`.
pub fn select_delta(
    kind: CriterionKind,
    ctx: &PowerPosteriorContext,
    grid_size: usize,
    tol: f64,
) -> Result<DeltaProfile> {
    if grid_size < 32 {
        return Err(PowerPriorError::InvalidConfig(format!(
            "grid_size = {grid_size} but at least 32 points are required"
        )));
    }
    if !(tol > 0.0 && tol <= 1e-4) {
        return Err(PowerPriorError::InvalidConfig(format!(
            "tol = {tol} must lie in (0, 1e-4]"
        )));
    }
    let crit = SelectionCriterion::new(kind, ctx)?;
    let sign = if kind.maximizes() { 1.0 } else { -1.0 };
    let scan = maximize_on_interval(
        |d| crit.evaluate(d, ctx).map(|v| sign * v),
        crit.lower,
        crit.upper,
        grid_size,
        tol,
    )?;
    let values: Vec<Option<f64>> = scan.values.iter().map(|v| v.map(|v| sign * v)).collect();
    Ok(DeltaProfile {
        criterion: kind,
        feasible_mask: values.iter().map(Option::is_some).collect(),
        grid: scan.grid,
        values,
        selected: scan.argmax,
        selected_value: sign * scan.max,
    })
}

/// Tabulates the criterion on a uniform grid over `[0, 1]` without
/// refinement; `selected` is the best grid point.
pub fn profile_curve(kind: CriterionKind, ctx: &PowerPosteriorContext, grid_size: usize) -> Result<DeltaProfile> {
    if grid_size < 32 {
        return Err(PowerPriorError::InvalidConfig(format!(
            "grid_size = {grid_size} but at least 32 points are required"
        )));
    }
    let crit = SelectionCriterion::new(kind, ctx)?;
    let grid = uniform_grid(0.0, 1.0, grid_size);
    let values: Vec<Option<f64>> = grid
        .iter()
        .map(|&d| {
            let in_domain = match kind {
                CriterionKind::MarginalLikelihood => ctx.feasible.admits(d),
                CriterionKind::Dic => d >= crit.lower,
            };
            if in_domain {
                crit.evaluate(d, ctx)
            } else {
                None
            }
        })
        .collect();
    let sign = if kind.maximizes() { 1.0 } else { -1.0 };
    let (idx, _) = values
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|v| (i, sign * v)))
        .fold((usize::MAX, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    if idx == usize::MAX {
        return Err(PowerPriorError::EmptyDomain);
    }
    Ok(DeltaProfile {
        criterion: kind,
        feasible_mask: values.iter().map(Option::is_some).collect(),
        selected: grid[idx],
        selected_value: values[idx].unwrap(),
        grid,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::stats_from_summary;
    use crate::prior::{make_nig_prior, make_reference_prior};
    use nalgebra::{DMatrix, DVector};

    fn fig1_ctx(gap: f64) -> PowerPosteriorContext {
        PowerPosteriorContext::new(
            make_reference_prior(1),
            stats_from_summary(10, gap, 0.5).unwrap(),
            stats_from_summary(10, 0.0, 0.5).unwrap(),
        )
        .unwrap()
    }

    fn dense_argmax(f: impl Fn(f64) -> Option<f64>, lo: f64, hi: f64, n: usize) -> f64 {
        let g = uniform_grid(lo, hi, n);
        let mut best = (g[0], f64::NEG_INFINITY);
        for &d in &g {
            if let Some(v) = f(d) {
                if v > best.1 {
                    best = (d, v);
                }
            }
        }
        best.0
    }

    #[test]
    fn eb_never_below_the_feasible_bound() {
        let ctx = fig1_ctx(1.5);
        let prof = select_delta(CriterionKind::MarginalLikelihood, &ctx, 64, 1e-6).unwrap();
        assert!(prof.selected > 0.1);
        assert!(prof.grid.iter().all(|&d| d > 0.1));
    }

    #[test]
    fn eb_matches_dense_grid() {
        let ctx = fig1_ctx(1.5);
        let prof = select_delta(CriterionKind::MarginalLikelihood, &ctx, 64, 1e-6).unwrap();
        let lo = 0.1 + EB_EPS;
        let dense = dense_argmax(|d| log_marginal_likelihood(d, &ctx).ok(), lo, 1.0, 10_000);
        assert!((prof.selected - dense).abs() <= 2.0 * (1.0 - lo) / 9999.0);
    }

    #[test]
    fn identical_data_with_proper_prior_borrows_heavily() {
        let st = stats_from_summary(15, 0.4, 0.8).unwrap();
        let prior = make_nig_prior(DVector::zeros(1), DMatrix::identity(1, 1), 1.0, 1.0).unwrap();
        let ctx = PowerPosteriorContext::new(prior, st.clone(), st).unwrap();
        let prof = select_delta(CriterionKind::MarginalLikelihood, &ctx, 64, 1e-6).unwrap();
        let dense = dense_argmax(|d| log_marginal_likelihood(d, &ctx).ok(), 0.0, 1.0, 10_000);
        assert!(dense > 0.5);
        assert!((prof.selected - dense).abs() <= 2.0 / 9999.0);
    }

    #[test]
    fn dic_domain_reaches_below_the_feasible_bound() {
        let ctx = fig1_ctx(1.5);
        let crit = SelectionCriterion::new(CriterionKind::Dic, &ctx).unwrap();
        assert_eq!(crit.lower, DIC_EPS);
        let prof = select_delta(CriterionKind::Dic, &ctx, 64, 1e-6).unwrap();
        assert!(prof.selected < 0.1);
        assert!(prof.feasible_mask.iter().all(|&m| m));
    }

    #[test]
    fn dic_domain_cut_by_shape() {
        // n = 2 current points with p = 1: ν(δ) = 5δ + 0.5, so ν > 1 needs δ > 0.1.
        let ctx = PowerPosteriorContext::new(
            make_reference_prior(1),
            stats_from_summary(10, 0.0, 0.5).unwrap(),
            stats_from_summary(2, 0.0, 0.5).unwrap(),
        )
        .unwrap();
        let crit = SelectionCriterion::new(CriterionKind::Dic, &ctx).unwrap();
        assert!((crit.lower - 0.1).abs() < 1e-8 && crit.lower > 0.1);
        let prof = profile_curve(CriterionKind::Dic, &ctx, 101).unwrap();
        for (d, m) in prof.grid.iter().zip(&prof.feasible_mask) {
            assert_eq!(*m, *d > 0.1 + 1e-9, "delta {d}");
        }
    }

    #[test]
    fn profile_mask_and_pointwise_values() {
        let ctx = fig1_ctx(0.5);
        let prof = profile_curve(CriterionKind::MarginalLikelihood, &ctx, 101).unwrap();
        for ((d, v), m) in prof.grid.iter().zip(&prof.values).zip(&prof.feasible_mask) {
            assert_eq!(*m, *d > 0.1 + 1e-9);
            if *m {
                assert_eq!(v.unwrap(), log_marginal_likelihood(*d, &ctx).unwrap());
            } else {
                assert!(v.is_none());
            }
        }
        let csv = prof.to_csv_string();
        assert!(csv.starts_with("delta,value,feasible\n0.0,,false\n"));
    }

    #[test]
    fn constant_shift_invariance() {
        let ctx = fig1_ctx(0.75);
        let f = |d: f64| log_marginal_likelihood(d, &ctx).ok();
        let a = maximize_on_interval(f, 0.1 + EB_EPS, 1.0, 64, 1e-7).unwrap();
        let b = maximize_on_interval(|d| f(d).map(|v| v + 100.0), 0.1 + EB_EPS, 1.0, 64, 1e-7).unwrap();
        assert!((a.argmax - b.argmax).abs() < 1e-6);
    }

    #[test]
    fn refinement_never_worse_than_grid() {
        for gap in [0.0, 0.3, 0.6, 0.9, 1.2, 1.5] {
            let ctx = fig1_ctx(gap);
            for kind in [CriterionKind::MarginalLikelihood, CriterionKind::Dic] {
                let prof = select_delta(kind, &ctx, 40, 1e-6).unwrap();
                let grid_best = prof.values.iter().flatten().cloned();
                let grid_best = if kind.maximizes() {
                    grid_best.fold(f64::NEG_INFINITY, f64::max)
                } else {
                    -grid_best.map(|v| -v).fold(f64::NEG_INFINITY, f64::max)
                };
                if kind.maximizes() {
                    assert!(prof.selected_value >= grid_best);
                } else {
                    assert!(prof.selected_value <= grid_best);
                }
            }
        }
    }

    #[test]
    fn flat_objective_prefers_least_borrowing() {
        let r = maximize_on_interval(|_| Some(1.0), 0.2, 1.0, 33, 1e-6).unwrap();
        assert_eq!(r.argmax, 0.2);
    }

    #[test]
    fn boundary_optimum_found() {
        let r = maximize_on_interval(Some, 0.0, 1.0, 33, 1e-8).unwrap();
        assert_eq!(r.argmax, 1.0);
        let r = maximize_on_interval(|d| Some(-(d - 0.123_456).powi(2)), 0.0, 1.0, 33, 1e-9).unwrap();
        assert!((r.argmax - 0.123_456).abs() < 1e-8);
    }

    #[test]
    fn argument_validation() {
        let ctx = fig1_ctx(0.0);
        assert!(select_delta(CriterionKind::Dic, &ctx, 16, 1e-6).is_err());
        assert!(select_delta(CriterionKind::Dic, &ctx, 64, 1e-3).is_err());
        assert_eq!(
            maximize_on_interval(|_| None, 0.0, 1.0, 40, 1e-6).unwrap_err(),
            PowerPriorError::EmptyDomain
        );
    }
}
