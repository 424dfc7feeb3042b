use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Subcommand, ValueEnum};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use powerborrow_core::oracle::{
    c_delta_quadrature, dic_monte_carlo, marginal_lik_quadrature, pooled_conjugate_posterior, QuadratureConfig,
};
use powerborrow_core::special::ln_binomial;
use powerborrow_core::{
    dic, feasible_set, generate_linear_data, likelihood_principle_table, log_c, log_marginal_likelihood,
    make_nig_prior, make_reference_prior, normalize_delta_posterior, posterior, posterior_moments,
    run_fig1, run_fig2, sample_posterior, select_delta, stats_from_summary, sufficient_stats,
    uniform_log_prior, BernoulliHistory, CriterionKind, FeasibleSet, Fig1Config, Fig2Config, Method,
    PowerPosteriorContext, PowerPriorError, SimResult,
};

use crate::error::CliError;
use crate::input::{parse_json, prior_config, prior_for_dimension, DataArgs};

pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Criterion {
    /// Empirical Bayes: maximize the marginal likelihood.
    Eb,
    /// Minimize the deviance information criterion.
    Dic,
}

impl From<Criterion> for CriterionKind {
    fn from(c: Criterion) -> Self {
        match c {
            Criterion::Eb => CriterionKind::MarginalLikelihood,
            Criterion::Dic => CriterionKind::Dic,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
pub enum OracleCase {
    /// Closed forms vs quadrature, pooled posterior and Monte-Carlo DIC.
    Default,
    /// Divergence verdicts for the reference prior with n0 = 10, p = 1.
    Improper,
    All,
}

#[derive(Debug, Args)]
pub struct FeasibleArgs {
    #[arg(long)]
    pub n0: usize,
    #[arg(long)]
    pub p: usize,
    #[arg(long, value_name = "JSON")]
    pub prior: Option<String>,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, default_value = "eb")]
    pub criterion: Criterion,
    #[arg(long, default_value_t = 256)]
    pub grid: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Also write the scanned criterion values as CSV.
    #[arg(long, value_name = "CSV")]
    pub profile: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProfileArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, default_value = "eb")]
    pub criterion: Criterion,
    #[arg(long, default_value_t = 201)]
    pub grid: usize,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    /// Output file; stdout when omitted.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PosteriorArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub delta: f64,
    /// Number of posterior draws to write to --output.
    #[arg(long, default_value_t = 0)]
    pub draws: usize,
    #[arg(long, env = "POWERBORROW_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DeltaPosteriorArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 2049)]
    pub grid: usize,
    /// Write the tabulated density as CSV.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Study {
    /// δ against the discrepancy of two summaries.
    Fig1(SimArgs),
    /// Regression study with simulated replicates.
    Fig2(SimArgs),
}

#[derive(Debug, Args)]
pub struct SimArgs {
    /// Full study configuration as JSON; flags below override it.
    #[arg(long, value_name = "JSON")]
    pub config: Option<String>,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long, env = "POWERBORROW_SEED")]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Comma-separated subset of EB1,EB2,DIC.
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long, value_enum, default_value = "default")]
    pub case: OracleCase,
    /// Monte-Carlo draws for the DIC check (accepts 1e5).
    #[arg(long, default_value = "1e5")]
    pub dic_draws: String,
    #[arg(long, env = "POWERBORROW_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct BernoulliArgs {
    #[arg(long, default_value_t = 3)]
    pub y0: u64,
    #[arg(long, default_value_t = 10)]
    pub n0: u64,
    #[arg(long, default_value_t = 1.0)]
    pub a1: f64,
    #[arg(long, default_value_t = 1.0)]
    pub a2: f64,
    /// Log of the likelihood constant; defaults to log(n0 choose y0).
    #[arg(long, allow_hyphen_values = true)]
    pub log_c0: Option<f64>,
}

fn print_json(v: &Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("json values serialize"));
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn feasible_json(fs: &FeasibleSet) -> Value {
    json!({
        "lower": fs.lower,
        "lower_open": fs.lower_open,
        "upper": fs.upper,
        "includes_zero": fs.includes_zero,
    })
}

pub fn feasible(args: &FeasibleArgs) -> Result<(), CliError> {
    let prior = prior_for_dimension(&prior_config(&args.prior)?, args.p)?;
    let fs = feasible_set(&prior, args.n0, args.p)?;
    print_json(&feasible_json(&fs));
    Ok(())
}

fn posterior_summary(delta: f64, ctx: &PowerPosteriorContext) -> Result<Value, CliError> {
    let post = posterior(delta, ctx)?;
    let moments = posterior_moments(&post).ok();
    Ok(json!({
        "beta": post.location.as_slice(),
        "shape": post.shape,
        "scale": post.scale,
        "mean_sigma2": moments.as_ref().map(|m| m.mean_sigma2),
        "cov_diag": moments.as_ref().map(|m| m.cov_beta.diagonal().as_slice().to_vec()),
    }))
}

pub fn select(args: &SelectArgs) -> Result<(), CliError> {
    let ctx = args.data.context()?;
    let kind = CriterionKind::from(args.criterion);
    let prof = select_delta(kind, &ctx, args.grid, args.tol)?;
    if let Some(path) = &args.profile {
        write_file(path, &prof.to_csv_string())?;
    }
    let mut out = json!({
        "criterion": kind.name(),
        "delta": prof.selected,
        "value": prof.selected_value,
        "feasible": feasible_json(&ctx.feasible),
        "profile": args.profile.as_ref().map(|p| p.display().to_string()),
        "posterior": posterior_summary(prof.selected, &ctx)?,
    });
    if kind == CriterionKind::Dic {
        let d = dic(prof.selected, &ctx)?;
        out["dic"] = json!(d.dic);
        out["p_d"] = json!(d.p_d);
    } else {
        out["log_marginal_likelihood"] = json!(prof.selected_value);
    }
    print_json(&out);
    Ok(())
}

pub fn profile(args: &ProfileArgs) -> Result<(), CliError> {
    let ctx = args.data.context()?;
    let prof = powerborrow_core::profile_curve(args.criterion.into(), &ctx, args.grid)?;
    let text = match args.format {
        Format::Csv => prof.to_csv_string(),
        Format::Json => serde_json::to_string_pretty(&prof).expect("profile serializes") + "\n",
    };
    match &args.output {
        Some(path) => write_file(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn posterior_cmd(args: &PosteriorArgs) -> Result<(), CliError> {
    let ctx = args.data.context()?;
    let post = posterior(args.delta, &ctx)?;
    let moments = posterior_moments(&post).ok();
    let precision: Vec<Vec<f64>> = post.precision.row_iter().map(|r| r.iter().copied().collect()).collect();
    let mut out = json!({
        "delta": args.delta,
        "location": post.location.as_slice(),
        "precision": precision,
        "shape": post.shape,
        "scale": post.scale,
        "mean_sigma2": moments.as_ref().map(|m| m.mean_sigma2),
        "cov_diag": moments.as_ref().map(|m| m.cov_beta.diagonal().as_slice().to_vec()),
    });
    if args.draws > 0 {
        let path = args
            .output
            .as_ref()
            .ok_or_else(|| CliError::Validation("--draws needs --output".into()))?;
        let draws = sample_posterior(&post, args.draws, args.seed)?;
        let p = post.location.len();
        let mut csv = String::from("sigma2");
        for j in 1..=p {
            let _ = write!(csv, ",beta{j}");
        }
        csv.push('\n');
        for d in &draws {
            let _ = write!(csv, "{:?}", d.sigma2);
            for b in d.beta.iter() {
                let _ = write!(csv, ",{b:?}");
            }
            csv.push('\n');
        }
        write_file(path, &csv)?;
        out["draws"] = json!({"count": args.draws, "seed": args.seed, "path": path.display().to_string()});
    }
    print_json(&out);
    Ok(())
}

pub fn delta_posterior(args: &DeltaPosteriorArgs) -> Result<(), CliError> {
    let ctx = args.data.context()?;
    let post = normalize_delta_posterior(&ctx, uniform_log_prior, args.grid)?;
    if let Some(path) = &args.output {
        let mut csv = String::from("delta,density\n");
        for (d, f) in post.grid.iter().zip(&post.density) {
            let _ = writeln!(csv, "{d:?},{f:?}");
        }
        write_file(path, &csv)?;
    }
    print_json(&json!({
        "mean": post.mean,
        "mode": post.mode,
        "log_normalizer": post.log_normalizer,
        "feasible": feasible_json(&post.feasible),
    }));
    Ok(())
}

fn config_hash<T: serde::Serialize>(cfg: &T) -> String {
    let bytes = serde_json::to_vec(cfg).expect("config serializes");
    let digest = Sha256::digest(&bytes);
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

fn parse_methods(names: &Option<Vec<String>>) -> Result<Option<Vec<Method>>, CliError> {
    names
        .as_ref()
        .map(|v| v.iter().map(|s| s.parse::<Method>().map_err(CliError::from)).collect())
        .transpose()
}

fn write_sim(res: &SimResult, dir: &Path, seed: Option<u64>, hash: &str) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let csv = dir.join(format!("{}.csv", res.study));
    let js = dir.join(format!("{}.json", res.study));
    write_file(&csv, &res.to_csv_string())?;
    write_file(&js, &res.to_json_string())?;
    print_json(&json!({
        "study": res.study,
        "seed": seed,
        "config_hash": hash,
        "records": res.records.len(),
        "failures": res.records.iter().map(|r| r.failures).sum::<usize>(),
        "csv": csv.display().to_string(),
        "json": js.display().to_string(),
    }));
    Ok(())
}

pub fn simulate(study: &Study) -> Result<(), CliError> {
    match study {
        Study::Fig1(a) => {
            let mut cfg: Fig1Config = match &a.config {
                Some(s) => parse_json(s, "fig1 config")?,
                None => Fig1Config::default(),
            };
            if let Some(m) = parse_methods(&a.methods)? {
                cfg.methods = m;
            }
            if a.replicates.is_some() || a.sigma.is_some() {
                return Err(CliError::Validation(
                    "fig1 is deterministic; --replicates and --sigma apply to fig2 only".into(),
                ));
            }
            let res = run_fig1(&cfg)?;
            write_sim(&res, &a.out_dir, None, &config_hash(&cfg))
        }
        Study::Fig2(a) => {
            let mut cfg: Fig2Config = match &a.config {
                Some(s) => parse_json(s, "fig2 config")?,
                None => Fig2Config::default(),
            };
            if let Some(r) = a.replicates {
                cfg.replicates = r;
            }
            if let Some(s) = a.seed {
                cfg.seed = s;
            }
            if let Some(w) = a.workers {
                cfg.workers = w;
            }
            if let Some(s) = a.sigma {
                cfg.sigma = s;
            }
            if let Some(m) = parse_methods(&a.methods)? {
                cfg.methods = m;
            }
            let res = run_fig2(&cfg)?;
            // the worker count does not affect results, so it is left out of the hash
            let hash = config_hash(&Fig2Config { workers: 0, ..cfg.clone() });
            write_sim(&res, &a.out_dir, Some(cfg.seed), &hash)
        }
    }
}

struct Check {
    name: String,
    ok: bool,
    detail: String,
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        ((a - b) / b).abs()
    }
}

fn default_checks(draws: usize, seed: u64) -> Result<Vec<Check>, CliError> {
    let mut checks = Vec::new();
    let cfg = QuadratureConfig::default();
    let st0 = stats_from_summary(10, 0.5, 0.5)?;
    let st = stats_from_summary(10, 0.0, 0.5)?;
    let nig = make_nig_prior(
        nalgebra::DVector::zeros(1),
        nalgebra::DMatrix::identity(1, 1),
        2.0,
        1.0,
    )?;
    for pr in [make_reference_prior(1), nig] {
        let ctx = PowerPosteriorContext::new(pr.clone(), st0.clone(), st.clone())?;
        for d in [ctx.feasible.lower + 0.05, 0.3, 0.7, 1.0] {
            let closed = log_c(d, &pr, &st0)?;
            let c = match c_delta_quadrature(d, &pr, &st0, &cfg) {
                Ok(q) => {
                    let e = rel(closed, q);
                    (e <= 1e-6, format!("closed {closed:.12} quadrature {q:.12} rel {e:.2e}"))
                }
                Err(e) => (false, e.to_string()),
            };
            checks.push(Check {
                name: format!("log_c/{}/delta={d:.3}", pr.label),
                ok: c.0,
                detail: c.1,
            });
            let closed = log_marginal_likelihood(d, &ctx)?;
            let m = match marginal_lik_quadrature(d, &ctx, &cfg) {
                Ok(q) => {
                    let e = rel(closed, q);
                    (e <= 1e-6, format!("closed {closed:.12} quadrature {q:.12} rel {e:.2e}"))
                }
                Err(e) => (false, e.to_string()),
            };
            checks.push(Check {
                name: format!("log_m/{}/delta={d:.3}", pr.label),
                ok: m.0,
                detail: m.1,
            });
        }
    }
    for p in [1usize, 3] {
        let beta: Vec<f64> = (0..p).map(|j| 1.0 + j as f64).collect();
        let d0 = generate_linear_data(&beta, 1.0, 20, seed)?;
        let d = generate_linear_data(&beta, 1.0, 20, seed.wrapping_add(1))?;
        let pooled = sufficient_stats(&d0.stack(&d)?)?;
        let pr = make_reference_prior(p);
        let ctx = PowerPosteriorContext::new(pr.clone(), sufficient_stats(&d0)?, sufficient_stats(&d)?)?;
        let a = posterior(1.0, &ctx)?;
        let b = pooled_conjugate_posterior(&pr, &pooled)?;
        let mut worst = rel(a.shape, b.shape).max(rel(a.scale, b.scale));
        for (x, y) in a.location.iter().zip(b.location.iter()).chain(a.precision.iter().zip(b.precision.iter())) {
            worst = worst.max(rel(*x, *y));
        }
        checks.push(Check {
            name: format!("pooled/p={p}"),
            ok: worst <= 1e-10,
            detail: format!("worst field rel err {worst:.2e}"),
        });
    }
    let ctx = PowerPosteriorContext::new(make_reference_prior(1), st0, st)?;
    for (i, d) in [0.2, 0.5, 1.0].into_iter().enumerate() {
        let cf = dic(d, &ctx)?;
        let mc = dic_monte_carlo(d, &ctx, draws, seed.wrapping_add(i as u64))?;
        let z_dic = (cf.dic - mc.dic).abs() / mc.dic_std_error;
        let z_pd = (cf.p_d - mc.p_d).abs() / mc.p_d_std_error;
        checks.push(Check {
            name: format!("dic/delta={d}"),
            ok: z_dic <= 3.0 && z_pd <= 3.0,
            detail: format!(
                "closed {:.6} mc {:.6} ({z_dic:.2} se); p_D closed {:.6} mc {:.6} ({z_pd:.2} se)",
                cf.dic, mc.dic, cf.p_d, mc.p_d
            ),
        });
    }
    Ok(checks)
}

fn improper_checks() -> Result<Vec<Check>, CliError> {
    let st0 = stats_from_summary(10, 0.0, 0.5)?;
    let pr = make_reference_prior(1);
    let bound = feasible_set(&pr, 10, 1)?.lower;
    let cfg = QuadratureConfig::default();
    let deltas = [0.0, 0.025, 0.05, 0.075, 0.09, 0.1, 0.15, 0.2, 0.3, 0.5, 0.7, 1.0];
    Ok(deltas
        .iter()
        .map(|&d| {
            let res = c_delta_quadrature(d, &pr, &st0, &cfg);
            let divergent = matches!(res, Err(PowerPriorError::Divergent));
            let verdict = match &res {
                Ok(v) => format!("finite (log C = {v:.10})"),
                Err(e) => e.to_string(),
            };
            Check {
                name: format!("improper/delta={d}"),
                ok: divergent == (d <= bound),
                detail: format!("{verdict}; expected {}", if d <= bound { "divergent" } else { "finite" }),
            }
        })
        .collect())
}

pub fn oracle_check(args: &OracleArgs) -> Result<(), CliError> {
    let draws = args
        .dic_draws
        .parse::<f64>()
        .ok()
        .filter(|v| v.fract() == 0.0 && *v >= 1.0 && *v <= 1e9)
        .ok_or_else(|| CliError::Validation(format!("--dic-draws {:?} is not a count", args.dic_draws)))?
        as usize;
    let mut checks = Vec::new();
    if matches!(args.case, OracleCase::Default | OracleCase::All) {
        checks.extend(default_checks(draws, args.seed)?);
    }
    if matches!(args.case, OracleCase::Improper | OracleCase::All) {
        checks.extend(improper_checks()?);
    }
    let mut failed = Vec::new();
    for c in &checks {
        println!("{} {} {}", if c.ok { "PASS" } else { "FAIL" }, c.name, c.detail);
        if !c.ok {
            failed.push(c.name.clone());
        }
    }
    if failed.is_empty() {
        println!("{} checks passed", checks.len());
        Ok(())
    } else {
        Err(CliError::Check(failed.join(", ")))
    }
}

pub fn bernoulli_demo(args: &BernoulliArgs) -> Result<(), CliError> {
    let hist = BernoulliHistory::new(args.y0, args.n0, args.a1, args.a2)?;
    let log_c0 = args.log_c0.unwrap_or_else(|| ln_binomial(args.n0, args.y0));
    let deltas: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
    let thetas: Vec<f64> = (1..100).map(|i| i as f64 / 100.0).collect();
    let rows = likelihood_principle_table(&hist, &deltas, &thetas, log_c0)?;
    println!("# log_c0 = {log_c0:?}; shifts are relative to delta = 0");
    println!("delta,npp_max_change,jpp_ratio_shift,expected_shift");
    for r in rows {
        println!("{:?},{:?},{:?},{:?}", r.delta, r.npp_max_change, r.jpp_ratio_shift, r.expected_shift);
    }
    Ok(())
}
