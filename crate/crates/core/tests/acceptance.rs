//! Acceptance criteria 1-10. Runs as a plain binary so that every criterion
//! prints its verdict; exits non-zero if any fails.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use statrs::distribution::{Beta, Binomial, Continuous, Discrete};

use powerborrow_core::oracle::{
    adaptive_gauss_kronrod, c_delta_quadrature, dic_monte_carlo, marginal_lik_quadrature,
    pooled_conjugate_posterior, QuadratureConfig,
};
use powerborrow_core::selection::SelectionCriterion;
use powerborrow_core::special::ln_binomial;
use powerborrow_core::*;

struct Verdict {
    ok: bool,
    detail: String,
}

fn verdict(ok: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        ok,
        detail: detail.into(),
    }
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        ((a - b) / b).abs()
    }
}

fn criterion_1() -> Verdict {
    let mut fails = Vec::new();
    for (p, n0, want) in [(1usize, 10usize, 0.1), (4, 20, 0.2)] {
        let fs = feasible_set(&make_reference_prior(p), n0, p).unwrap();
        if fs.lower != want || !fs.lower_open || fs.includes_zero {
            fails.push(format!("reference p={p} n0={n0}: {fs:?}"));
        }
    }
    let xtx = DMatrix::from_row_slice(2, 2, &[20.0, 9.0, 9.0, 7.0]);
    let g = make_zellner_g_prior(20.0, &xtx, DVector::zeros(2)).unwrap();
    let fs = feasible_set(&g, 20, 2).unwrap();
    if fs.lower != 0.0 {
        fails.push(format!("zellner: {fs:?}"));
    }
    let nig = make_nig_prior(DVector::zeros(2), DMatrix::identity(2, 2), 2.0, 1.0).unwrap();
    let fs = feasible_set(&nig, 20, 2).unwrap();
    if fs.lower != 0.0 || !fs.includes_zero {
        fails.push(format!("nig: {fs:?}"));
    }
    verdict(fails.is_empty(), if fails.is_empty() { "all bounds exact".into() } else { fails.join("; ") })
}

/// Historical summaries for the scalar suite.
fn scalar_histories() -> Vec<GaussianSuffStats> {
    vec![
        stats_from_summary(10, 0.0, 0.5).unwrap(),
        stats_from_summary(10, 0.8, 1.3).unwrap(),
        stats_from_summary(20, -0.4, 0.7).unwrap(),
    ]
}

fn scalar_priors() -> Vec<PriorSpec> {
    vec![
        make_reference_prior(1),
        make_nig_prior(DVector::from_element(1, 0.2), DMatrix::from_element(1, 1, 0.5), 1.5, 0.8).unwrap(),
    ]
}

fn suite_deltas(fs: &FeasibleSet) -> [f64; 4] {
    [fs.lower + 0.05, 0.3, 0.7, 1.0]
}

fn criterion_2() -> Verdict {
    let cfg = QuadratureConfig::default();
    let mut cases = 0;
    let mut worst = 0.0f64;
    let mut fails = Vec::new();
    for pr in scalar_priors() {
        for st0 in scalar_histories() {
            let fs = feasible_set(&pr, st0.n, 1).unwrap();
            for d in suite_deltas(&fs) {
                cases += 1;
                let closed = log_c(d, &pr, &st0).unwrap();
                match c_delta_quadrature(d, &pr, &st0, &cfg) {
                    Ok(q) => {
                        let e = rel(closed, q);
                        worst = worst.max(e);
                        if e > 1e-6 {
                            fails.push(format!("{} n0={} δ={d}: rel {e:e}", pr.label, st0.n));
                        }
                    }
                    Err(e) => fails.push(format!("{} n0={} δ={d}: {e}", pr.label, st0.n)),
                }
            }
        }
    }
    let mut divergent = 0;
    let pr = make_reference_prior(1);
    for st0 in scalar_histories() {
        let fs = feasible_set(&pr, st0.n, 1).unwrap();
        for d in [fs.lower - 0.01, fs.lower / 2.0, 0.0] {
            divergent += 1;
            match c_delta_quadrature(d, &pr, &st0, &cfg) {
                Err(PowerPriorError::Divergent) => {}
                other => fails.push(format!("expected Divergent at n0={} δ={d}, got {other:?}", st0.n)),
            }
        }
    }
    verdict(
        fails.is_empty() && cases >= 20,
        format!("{cases} cases, worst rel err {worst:.2e}; {divergent} divergence cases {}", fails.join("; ")),
    )
}

fn criterion_3() -> Verdict {
    let cfg = QuadratureConfig::default();
    let current = [stats_from_summary(10, 0.0, 0.5).unwrap(), stats_from_summary(15, 0.3, 0.9).unwrap()];
    let mut cases = 0;
    let mut worst = 0.0f64;
    let mut fails = Vec::new();
    for pr in scalar_priors() {
        for (i, st0) in scalar_histories().into_iter().enumerate() {
            let st = current[i % 2].clone();
            let ctx = PowerPosteriorContext::new(pr.clone(), st0, st).unwrap();
            for d in suite_deltas(&ctx.feasible) {
                cases += 1;
                let closed = log_marginal_likelihood(d, &ctx).unwrap();
                match marginal_lik_quadrature(d, &ctx, &cfg) {
                    Ok(q) => {
                        let e = rel(closed, q);
                        worst = worst.max(e);
                        if e > 1e-6 {
                            fails.push(format!("{} δ={d}: rel {e:e}", pr.label));
                        }
                    }
                    Err(e) => fails.push(format!("{} δ={d}: {e}", pr.label)),
                }
            }
        }
    }
    // log m(1) = log C over the pooled data minus log C over the history
    let mut worst_id = 0.0f64;
    for (p, seed) in [(1usize, 1u64), (4, 2)] {
        let beta: Vec<f64> = (0..p).map(|j| 1.0 + 0.5 * j as f64).collect();
        let d0 = generate_linear_data(&beta, 1.0, 20, seed).unwrap();
        let d = generate_linear_data(&beta, 1.0, 20, seed + 100).unwrap();
        let st0 = sufficient_stats(&d0).unwrap();
        let st = sufficient_stats(&d).unwrap();
        let pooled = sufficient_stats(&d0.stack(&d).unwrap()).unwrap();
        let nig = make_nig_prior(DVector::zeros(p), DMatrix::identity(p, p), 2.0, 1.0).unwrap();
        for pr in [make_reference_prior(p), nig] {
            let ctx = PowerPosteriorContext::new(pr.clone(), st0.clone(), st.clone()).unwrap();
            let lhs = log_marginal_likelihood(1.0, &ctx).unwrap();
            let rhs = log_c(1.0, &pr, &pooled).unwrap() - log_c(1.0, &pr, &st0).unwrap();
            let e = (lhs - rhs).abs();
            worst_id = worst_id.max(e);
            if e > 1e-8 {
                fails.push(format!("decomposition {} p={p}: {e:e}", pr.label));
            }
        }
    }
    verdict(
        fails.is_empty() && cases >= 20,
        format!(
            "{cases} cases, worst rel err {worst:.2e}; δ=1 identity worst abs err {worst_id:.2e} {}",
            fails.join("; ")
        ),
    )
}

fn criterion_4() -> Verdict {
    let mut worst = 0.0f64;
    let mut fails = Vec::new();
    for (p, seed) in [(1usize, 7u64), (4, 8)] {
        let beta: Vec<f64> = (0..p).map(|j| 1.0 - 0.3 * j as f64).collect();
        let d0 = generate_linear_data(&beta, 1.0, 20, seed).unwrap();
        let d = generate_linear_data(&beta, 0.8, 25, seed + 50).unwrap();
        let st0 = sufficient_stats(&d0).unwrap();
        let st = sufficient_stats(&d).unwrap();
        let pooled = sufficient_stats(&d0.stack(&d).unwrap()).unwrap();
        let r = DMatrix::from_fn(p, p, |i, j| if i == j { 2.0 } else { 0.5 });
        let nig = make_nig_prior(DVector::from_element(p, 0.4), r, 3.0, 2.0).unwrap();
        for pr in [make_reference_prior(p), nig] {
            let ctx = PowerPosteriorContext::new(pr.clone(), st0.clone(), st.clone()).unwrap();
            let a = posterior(1.0, &ctx).unwrap();
            let b = pooled_conjugate_posterior(&pr, &pooled).unwrap();
            let mut errs = vec![rel(a.shape, b.shape), rel(a.scale, b.scale)];
            errs.extend(a.location.iter().zip(b.location.iter()).map(|(x, y)| rel(*x, *y)));
            errs.extend(a.precision.iter().zip(b.precision.iter()).map(|(x, y)| rel(*x, *y)));
            let e = errs.into_iter().fold(0.0, f64::max);
            worst = worst.max(e);
            if e > 1e-10 {
                fails.push(format!("{} p={p}: rel {e:e}", pr.label));
            }
        }
    }
    verdict(fails.is_empty(), format!("worst field rel err {worst:.2e} {}", fails.join("; ")))
}

fn criterion_5() -> Verdict {
    let st0 = stats_from_summary(10, 0.5, 0.5).unwrap();
    let st = stats_from_summary(10, 0.0, 0.5).unwrap();
    let ctx = PowerPosteriorContext::new(make_reference_prior(1), st0, st).unwrap();
    let mut fails = Vec::new();
    let mut worst = 0.0f64;
    for (i, d) in [0.2, 0.5, 1.0].into_iter().enumerate() {
        let cf = dic(d, &ctx).unwrap();
        let mc = dic_monte_carlo(d, &ctx, 100_000, 900 + i as u64).unwrap();
        let z_dic = (cf.dic - mc.dic).abs() / mc.dic_std_error;
        let z_pd = (cf.p_d - mc.p_d).abs() / mc.p_d_std_error;
        worst = worst.max(z_dic).max(z_pd);
        if !(z_dic <= 3.0 && z_pd <= 3.0) {
            fails.push(format!("δ={d}: DIC z={z_dic:.2}, p_D z={z_pd:.2}"));
        }
    }
    verdict(fails.is_empty(), format!("largest gap {worst:.2} standard errors {}", fails.join("; ")))
}

fn criterion_6() -> Verdict {
    let res = run_fig1(&Fig1Config::default()).unwrap();
    let mut fails = Vec::new();
    for m in Method::ALL {
        let curve: Vec<f64> = res.curve(m).iter().map(|r| r.mean_delta).collect();
        if curve.windows(2).any(|w| w[1] > w[0] + 0.02) {
            fails.push(format!("{} increases", m.name()));
        }
    }
    if res.curve(Method::EB1).iter().any(|r| r.mean_delta <= 0.1) {
        fails.push("EB1 reaches 0.1".into());
    }
    let last = |m: Method| res.curve(m).last().unwrap().mean_delta;
    let (e1, e2, dc) = (last(Method::EB1), last(Method::EB2), last(Method::DIC));
    if !(e2 < e1 && dc < e1) {
        fails.push("ordering at 1.5".into());
    }
    verdict(
        fails.is_empty(),
        format!("at d=1.5: EB1 {e1:.4}, EB2 {e2:.4}, DIC {dc:.4} {}", fails.join("; ")),
    )
}

fn criterion_7() -> Verdict {
    let cfg = Fig2Config {
        workers: 1,
        ..Default::default()
    };
    let start = Instant::now();
    let res = run_fig2(&cfg).unwrap();
    let single = start.elapsed().as_secs_f64();
    let multi = run_fig2(&Fig2Config { workers: 4, ..cfg.clone() }).unwrap();
    let mut fails = Vec::new();
    if res.to_csv_string() != multi.to_csv_string() {
        fails.push("worker count changes output".into());
    }
    if res.records.iter().any(|r| r.failures > 0) {
        fails.push("selection failures".into());
    }
    let eb1 = res.curve(Method::EB1);
    let min_delta = eb1.iter().map(|r| r.mean_delta).fold(f64::INFINITY, f64::min);
    if min_delta < 0.2 {
        fails.push(format!("EB1 mean δ {min_delta:.3} < 0.2"));
    }
    let mse: Vec<f64> = eb1.iter().map(|r| r.log_mse.unwrap()).collect();
    let inversions = mse.windows(2).filter(|w| w[1] <= w[0]).count();
    if inversions > 1 {
        fails.push(format!("{inversions} inversions in EB1 logMSE"));
    }
    let at2 = |m: Method| {
        res.curve(m)
            .into_iter()
            .find(|r| (r.cell - 2.0).abs() < 1e-12)
            .and_then(|r| r.log_mse)
            .unwrap()
    };
    let (e1, dc) = (at2(Method::EB1), at2(Method::DIC));
    if !(dc < e1) {
        fails.push("DIC does not beat EB1 at 2".into());
    }
    if single > 600.0 {
        fails.push(format!("single-worker run took {single:.0} s"));
    }
    verdict(
        fails.is_empty(),
        format!(
            "min EB1 mean δ {min_delta:.3}, {inversions} inversion(s), logMSE at 2: EB1 {e1:.3} DIC {dc:.3}, {single:.1} s {}",
            fails.join("; ")
        ),
    )
}

fn criterion_8() -> Verdict {
    let hist = BernoulliHistory::new(3, 10, 1.0, 1.0).unwrap();
    let deltas: Vec<f64> = (0..51).map(|i| i as f64 / 50.0).collect();
    let thetas: Vec<f64> = (0..51).map(|i| 0.01 + 0.98 * i as f64 / 50.0).collect();
    let mut npp = 0.0f64;
    let mut jpp = 0.0f64;
    for &d in &deltas {
        for &th in &thetas {
            let base = npp_log_density(th, d, &hist, 0.0).unwrap();
            for c in [-50.0, 50.0] {
                npp = npp.max((npp_log_density(th, d, &hist, c).unwrap() - base).abs());
            }
        }
    }
    for &d1 in &deltas {
        let d2 = 0.5;
        for c in [-50.0, 50.0] {
            let ratio = |lc| jpp_log_kernel(0.3, d1, &hist, lc).unwrap() - jpp_log_kernel(0.3, d2, &hist, lc).unwrap();
            jpp = jpp.max((ratio(c) - ratio(0.0) - (d1 - d2) * c).abs());
        }
    }
    let mut binom = 0.0f64;
    let prior = Beta::new(1.0, 1.0).unwrap();
    for &th in &thetas {
        let b = Binomial::new(th, 10).unwrap();
        for &d in &deltas {
            let want = d * b.ln_pmf(3) + prior.ln_pdf(th);
            binom = binom.max((jpp_log_kernel(th, d, &hist, ln_binomial(10, 3)).unwrap() - want).abs());
        }
    }
    verdict(
        npp < 1e-12 && jpp < 1e-12 && binom < 1e-11,
        format!("NPP spread {npp:.1e}, JPP shift error {jpp:.1e}, binomial match {binom:.1e}"),
    )
}

fn criterion_9() -> Verdict {
    let mut fails = Vec::new();
    let mut worst = 0.0f64;
    let st = stats_from_summary(10, 0.0, 0.5).unwrap();
    let cases = [
        (make_reference_prior(1), 0.0),
        (make_reference_prior(1), 0.5),
        (make_reference_prior(1), 1.5),
        (make_nig_prior(DVector::zeros(1), DMatrix::identity(1, 1), 2.0, 0.5).unwrap(), 0.8),
    ];
    for (pr, d) in cases {
        let st0 = stats_from_summary(10, d, 0.5).unwrap();
        let ctx = PowerPosteriorContext::new(pr.clone(), st0, st.clone()).unwrap();
        let post = normalize_delta_posterior(&ctx, uniform_log_prior, 4096).unwrap();
        let lz = post.log_normalizer;
        let z = adaptive_gauss_kronrod(
            |x| (delta_log_posterior(x, &ctx, uniform_log_prior).unwrap() - lz).exp(),
            ctx.feasible.lower,
            1.0,
            1e-12,
            1e-10,
        );
        worst = worst.max((z - 1.0).abs());
        if (z - 1.0).abs() > 1e-6 {
            fails.push(format!("{} d={d}: integral {z}", pr.label));
        }
        let spacing = post.grid[1] - post.grid[0];
        let eb = select_delta(CriterionKind::MarginalLikelihood, &ctx, 256, 1e-8).unwrap().selected;
        if (post.mode - eb).abs() > spacing {
            fails.push(format!("{} d={d}: mode {} vs δ_EB {eb}", pr.label, post.mode));
        }
        let outside = [-0.5, ctx.feasible.lower - 0.01, 1.0 + 1e-9, 1.5];
        let inside_open = if ctx.feasible.lower_open { vec![ctx.feasible.lower] } else { vec![] };
        if outside
            .iter()
            .chain(&inside_open)
            .filter(|x| !ctx.feasible.contains(**x))
            .any(|&x| post.density_at(x) != 0.0)
        {
            fails.push(format!("{} d={d}: mass outside the feasible set", pr.label));
        }
    }
    verdict(fails.is_empty(), format!("worst |Z - 1| {worst:.1e} {}", fails.join("; ")))
}

fn random_instance(rng: &mut ChaCha20Rng) -> (PowerPosteriorContext, CriterionKind) {
    let p = rng.gen_range(1..=3usize);
    let n0 = rng.gen_range(p + 3..=30);
    let n = rng.gen_range(p + 3..=30);
    let beta: Vec<f64> = (0..p).map(|_| rng.gen_range(-1.0..2.0)).collect();
    let beta0: Vec<f64> = beta.iter().map(|b| b + rng.gen_range(-1.5..1.5)).collect();
    let sigma = rng.gen_range(0.3..2.0);
    let st0 = sufficient_stats(&generate_linear_data(&beta0, sigma, n0, rng.gen()).unwrap()).unwrap();
    let st = sufficient_stats(&generate_linear_data(&beta, sigma, n, rng.gen()).unwrap()).unwrap();
    let prior = match rng.gen_range(0..3) {
        0 => make_reference_prior(p),
        1 => make_zellner_g_prior(rng.gen_range(1.0..50.0), &st0.xtx, DVector::zeros(p)).unwrap(),
        _ => make_nig_prior(
            DVector::from_fn(p, |_, _| rng.gen_range(-1.0..1.0)),
            DMatrix::identity(p, p) * rng.gen_range(0.1..3.0),
            rng.gen_range(0.5..4.0),
            rng.gen_range(0.1..3.0),
        )
        .unwrap(),
    };
    let kind = if rng.gen() { CriterionKind::MarginalLikelihood } else { CriterionKind::Dic };
    (PowerPosteriorContext::new(prior, st0, st).unwrap(), kind)
}

fn criterion_10() -> Verdict {
    let mut rng = ChaCha20Rng::seed_from_u64(2024);
    let mut fails = Vec::new();
    let mut worst = 0.0f64;
    let mut done = 0;
    while done < 20 {
        let (ctx, kind) = random_instance(&mut rng);
        let crit = match SelectionCriterion::new(kind, &ctx) {
            Ok(c) => c,
            Err(_) => continue,
        };
        done += 1;
        let m = 10_000;
        let h = (crit.upper - crit.lower) / (m - 1) as f64;
        let sign = if kind.maximizes() { 1.0 } else { -1.0 };
        let mut best = (f64::NAN, f64::NEG_INFINITY);
        for i in 0..m {
            let d = if i + 1 == m { crit.upper } else { crit.lower + i as f64 * h };
            if let Some(v) = crit.evaluate(d, &ctx) {
                if sign * v > best.1 {
                    best = (d, sign * v);
                }
            }
        }
        let sel = select_delta(kind, &ctx, 256, 1e-8).unwrap().selected;
        let gap = (sel - best.0).abs() / h;
        worst = worst.max(gap);
        if gap > 2.0 {
            fails.push(format!("{} {} p={}: selected {sel}, grid {}", kind.name(), ctx.prior.label, ctx.p(), best.0));
        }
    }
    verdict(fails.is_empty(), format!("20 instances, worst gap {worst:.2} grid steps {}", fails.join("; ")))
}

fn main() {
    type Criterion = (&'static str, fn() -> Verdict);
    let criteria: [Criterion; 10] = [
        ("feasible-set exactness", criterion_1),
        ("normalizing constant vs quadrature", criterion_2),
        ("marginal likelihood vs quadrature", criterion_3),
        ("full-borrowing pooled identity", criterion_4),
        ("DIC vs Monte Carlo", criterion_5),
        ("intercept-only study", criterion_6),
        ("regression study", criterion_7),
        ("likelihood principle", criterion_8),
        ("normalized δ-posterior", criterion_9),
        ("selection vs dense grid", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = f();
        println!(
            "criterion {:>2} {:<36} {}  ({:.1} s) {}",
            i + 1,
            name,
            if v.ok { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            v.detail.trim_end()
        );
        failed += usize::from(!v.ok);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
