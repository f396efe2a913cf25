//! Bayesian calibration of the climate parameters.
//!
//! The posterior `p(theta | y) ~ p(y | theta) p(theta)` is sampled with a
//! delayed-rejection adaptive Metropolis chain, where `y = F(x | theta) + eps`
//! with independent Gaussian errors on annual temperature anomalies and
//! (optionally) CO2 concentrations.

mod chain;
mod diagnostics;
mod dram;
mod evidence;
mod likelihood;
mod prior;

pub use chain::PosteriorChain;
pub use diagnostics::{
    autocorrelation, diagnostics, integrated_autocorrelation_time, split_rhat, ChainReport, ParameterSummary,
};
pub use dram::{dram, DramConfig};
pub use evidence::{log_evidence, model_posterior, EvidenceConfig, EvidenceModel, ModelComparison};
pub use likelihood::{gaussian_log_likelihood, CalibrationProblem, LikelihoodConfig};
pub use prior::{Family, Prior, PriorSpec};

use crate::error::Result;
use crate::scenario::Scenario;
use crate::uncertainty::{propagate, CredibleBand, ParameterSource, PropagationConfig};

/// Temperature band from `cfg.n` posterior draws (with replacement) run through `scenario`.
pub fn posterior_predictive(
    chain: &PosteriorChain,
    scenario: &Scenario,
    cfg: &PropagationConfig,
) -> Result<CredibleBand> {
    propagate(scenario, &ParameterSource::Chain(chain), None, cfg)
}
