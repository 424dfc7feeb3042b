//! Dataset and prior resolution from command-line sources.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use nalgebra::DMatrix;
use powerborrow_core::{
    sufficient_stats, Dataset, GaussianSuffStats, PowerPosteriorContext, PowerPriorError, PriorConfig,
    SummaryInput,
};

use crate::error::CliError;

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Historical data CSV (column `y` is the response).
    #[arg(long, value_name = "CSV", conflicts_with = "hist_summary")]
    pub hist: Option<PathBuf>,
    /// Historical summary, inline JSON or a file: {"n":10,"ybar":0,"sd":0.5}.
    #[arg(long, value_name = "JSON")]
    pub hist_summary: Option<String>,
    /// Current data CSV.
    #[arg(long, value_name = "CSV", conflicts_with = "current_summary")]
    pub current: Option<PathBuf>,
    /// Current summary, inline JSON or a file.
    #[arg(long, value_name = "JSON")]
    pub current_summary: Option<String>,
    /// Prior configuration, inline JSON or a file; defaults to the reference prior.
    #[arg(long, value_name = "JSON")]
    pub prior: Option<String>,
}

/// Inline JSON if it looks like an object, otherwise a path to read.
pub fn json_text(arg: &str) -> Result<String, CliError> {
    if arg.trim_start().starts_with('{') {
        Ok(arg.to_string())
    } else {
        fs::read_to_string(arg).map_err(|e| CliError::Io(format!("{arg}: {e}")))
    }
}

pub fn parse_json<T: serde::de::DeserializeOwned>(arg: &str, what: &str) -> Result<T, CliError> {
    serde_json::from_str(&json_text(arg)?).map_err(|e| CliError::Validation(format!("invalid {what}: {e}")))
}

fn load_csv(path: &Path) -> Result<Dataset, CliError> {
    Dataset::from_csv_path(path).map_err(|e| match e {
        PowerPriorError::Io(m) => CliError::Io(format!("{}: {m}", path.display())),
        other => CliError::Validation(format!("{}: {other}", path.display())),
    })
}

fn load_stats(csv: &Option<PathBuf>, summary: &Option<String>, which: &str) -> Result<GaussianSuffStats, CliError> {
    match (csv, summary) {
        (Some(path), None) => Ok(sufficient_stats(&load_csv(path)?)?),
        (None, Some(s)) => Ok(parse_json::<SummaryInput>(s, "summary")?.to_stats()?),
        _ => Err(CliError::Validation(format!(
            "give exactly one of --{which} or --{which}-summary"
        ))),
    }
}

pub fn prior_config(arg: &Option<String>) -> Result<PriorConfig, CliError> {
    match arg {
        None => Ok(PriorConfig::Reference),
        Some(s) => parse_json(s, "prior"),
    }
}

impl DataArgs {
    pub fn context(&self) -> Result<PowerPosteriorContext, CliError> {
        let stats0 = load_stats(&self.hist, &self.hist_summary, "hist")?;
        let stats = load_stats(&self.current, &self.current_summary, "current")?;
        let prior = prior_config(&self.prior)?.resolve(stats.p, &stats.xtx, &stats0.xtx)?;
        Ok(PowerPosteriorContext::new(prior, stats0, stats)?)
    }
}

/// The feasible set does not depend on `R`, so a placeholder design suffices.
pub fn prior_for_dimension(cfg: &PriorConfig, p: usize) -> Result<powerborrow_core::PriorSpec, CliError> {
    let eye = DMatrix::identity(p, p);
    Ok(cfg.resolve(p, &eye, &eye)?)
}
