//! Power-prior analysis for normal linear models.
//!
//! Closed-form normalizing constants and marginal likelihoods, the feasible
//! set of the power parameter δ, empirical-Bayes and DIC selection of δ,
//! conjugate posterior inference, brute-force oracles, and a simulation
//! harness for the intercept-only and regression studies.

pub mod bernoulli;
pub mod data;
pub mod error;
pub mod linalg;
pub mod oracle;
pub mod posterior;
pub mod prior;
pub mod selection;
pub mod sim;
pub mod special;

pub use bernoulli::{
    jpp_log_kernel, likelihood_principle_table, npp_log_density, BernoulliHistory, InvarianceRow,
};
pub use data::{stats_from_summary, sufficient_stats, Dataset, GaussianSuffStats, SummaryInput};
pub use error::{PowerPriorError, Result};
pub use linalg::{chol_logdet, SpdFactor};
pub use oracle::{
    adaptive_gauss_kronrod, c_delta_quadrature, dic_monte_carlo, marginal_lik_quadrature,
    pooled_conjugate_posterior, MonteCarloDic, QuadratureConfig,
};
pub use posterior::{
    delta_log_posterior, dic, log_c, log_marginal_likelihood, nig_coefficients,
    normalize_delta_posterior, posterior, posterior_moments, sample_posterior, uniform_log_prior,
    DeltaPosterior, DicValue, NigCoefficients, NigPosterior, PosteriorDraw, PosteriorMoments,
    PowerPosteriorContext,
};
pub use prior::{
    feasible_set, make_nig_prior, make_reference_prior, make_zellner_g_prior, FeasibleSet,
    PriorConfig, PriorSpec, XtxSource,
};
pub use selection::{
    maximize_on_interval, profile_curve, select_delta, CriterionKind, DeltaProfile,
    SelectionCriterion,
};
pub use sim::{
    generate_linear_data, run_fig1, run_fig2, Fig1Config, Fig2Config, Method, SimRecord, SimResult,
};
