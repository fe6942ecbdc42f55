//! Non-parametric Bayesian estimation of the intensity function of a 1-D
//! Poisson point process from replicated observations.
//!
//! Two estimators over a piecewise-constant intensity on N bins:
//!
//! * [`conjugate`] — independent gamma priors on the bin heights give a
//!   closed-form product-gamma posterior, exact marginal likelihood (used
//!   for empirical-Bayes bin selection), and quantile credible bands.
//! * [`gmc`] — a gamma Markov chain prior couples neighbouring heights for
//!   smoothing; posterior inference runs a Gibbs sampler with a
//!   Metropolis-within-Gibbs update of the coupling strength.
//!
//! [`rj`] adds a reversible-jump sampler over the number of bins, with the
//! exact enumerable model posterior as its built-in oracle; [`sim`] holds
//! benchmark intensities, a thinning simulator, and the rate-check
//! experiment harness; [`cli`] is the command-line surface.

pub mod cli;
pub mod conjugate;
pub mod diagnostics;
pub mod dist;
pub mod error;
pub mod gmc;
pub mod ingest;
pub mod model;
pub mod quad;
pub mod report;
pub mod rj;
pub mod rng;
pub mod sim;
pub mod special;

pub use conjugate::{
    calibrate_beta, credible_band, fit_conjugate, log_marginal_likelihood, posterior_mean,
    select_bins_empirical_bayes, BandLevel, IndepGammaPosterior, IndepGammaPrior, PosteriorBand,
};
pub use dist::{sample_gamma, sample_inverse_gamma, GammaParams};
pub use error::{Error, Result};
pub use gmc::{
    gibbs_sweep, mwg_alpha_update, rule_of_thumb_bins, run_gmc, sample_gmc_prior,
    summarize_chain, AlphaPrior, ChainOutput, Coupling, GmcHyperparams, GmcOptions, GmcState,
};
pub use model::{
    bin_events, fold_periodic, l2_distance, l2_distance_steps, log_likelihood, BinGrid,
    BinnedCounts, EventSeries, PiecewiseIntensity,
};
pub use rj::{
    exact_model_posterior, log_model_score, proposal_log_ratio, run_rj, ModelIndexPrior,
    RjConfig, RjOutput,
};
pub use rng::RngStream;
pub use sim::{
    contraction_experiment, mse_experiment, simulate_poisson, BinRule, NamedIntensity,
};
pub use special::{gamma_quantile, log_gamma_fn};
