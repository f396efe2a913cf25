use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fair::{ClimateState, FairConfig, FairModel, ParameterVector};
use crate::scenario::{ObservationSeries, Scenario};

use super::chain::PosteriorChain;
use super::dram::{dram, DramConfig};
use super::prior::PriorSpec;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Independent Gaussian observation errors with one SD per series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodConfig {
    pub temperature_sd: f64,
    /// Include CO2 concentration residuals with this SD (ppm); `None` uses temperature only.
    #[serde(default)]
    pub co2_sd: Option<f64>,
}

impl LikelihoodConfig {
    /// Temperature-only likelihood with the series' declared noise.
    pub fn temperature_only(obs: &ObservationSeries) -> Self {
        LikelihoodConfig {
            temperature_sd: obs.temperature_noise_sd,
            co2_sd: None,
        }
    }

    /// Temperature and concentration residuals with the series' declared noise.
    pub fn with_co2(obs: &ObservationSeries) -> Self {
        LikelihoodConfig {
            temperature_sd: obs.temperature_noise_sd,
            co2_sd: Some(obs.co2_noise_sd),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |s: f64| s > 0.0 && s.is_finite();
        if !ok(self.temperature_sd) || self.co2_sd.is_some_and(|s| !ok(s)) {
            return Err(Error::Config("observation noise SDs must be positive".into()));
        }
        Ok(())
    }
}

/// Gaussian log-likelihood of residuals with common SD.
pub fn gaussian_log_likelihood(residuals: &[f64], sd: f64) -> f64 {
    let n = residuals.len() as f64;
    let ss: f64 = residuals.iter().map(|r| r * r).sum();
    -0.5 * ss / (sd * sd) - 0.5 * n * (LN_2PI + 2.0 * sd.ln())
}

/// Everything needed to evaluate the posterior of the climate parameters
/// against a historical record.
#[derive(Debug)]
pub struct CalibrationProblem {
    model: FairModel,
    history: Scenario,
    obs: ObservationSeries,
    likelihood: LikelihoodConfig,
    prior: PriorSpec,
    /// Index into the model output for each observation year.
    obs_index: Vec<usize>,
    reference_index: Option<(usize, usize)>,
    failures: AtomicUsize,
    evaluations: AtomicUsize,
}

impl CalibrationProblem {
    /// `scenario` supplies the historical emissions; it is cut at the last observed year.
    pub fn new(
        scenario: &Scenario,
        obs: ObservationSeries,
        likelihood: LikelihoodConfig,
        prior: PriorSpec,
        fair: FairConfig,
    ) -> Result<Self> {
        obs.validate()?;
        likelihood.validate()?;
        prior.validate()?;
        let first = scenario.pathway.first_year();
        if obs.first_year() <= first || obs.last_year() > scenario.pathway.last_year() {
            return Err(Error::Config(format!(
                "observations {}-{} not inside emission history {}-{}",
                obs.first_year(),
                obs.last_year(),
                first,
                scenario.pathway.last_year()
            )));
        }
        let history = scenario.window(first, obs.last_year())?;
        let obs_index = obs.years.iter().map(|y| (y - first) as usize).collect();
        let reference_index = match obs.reference_period {
            Some((a, b)) => {
                if a < first || b > obs.last_year() {
                    return Err(Error::Config(format!(
                        "reference period {a}-{b} outside the model window"
                    )));
                }
                Some(((a - first) as usize, (b - first) as usize))
            }
            None => None,
        };
        let mut fair = fair;
        if fair.reference_emissions.is_none() {
            fair.reference_emissions = Some(scenario.pathway.row(0).to_vec());
        }
        Ok(CalibrationProblem {
            model: FairModel::new(fair, scenario.pathway.schema().clone())?,
            history,
            obs,
            likelihood,
            prior,
            obs_index,
            reference_index,
            failures: AtomicUsize::new(0),
            evaluations: AtomicUsize::new(0),
        })
    }

    pub fn prior(&self) -> &PriorSpec {
        &self.prior
    }

    pub fn observations(&self) -> &ObservationSeries {
        &self.obs
    }

    pub fn model(&self) -> &FairModel {
        &self.model
    }

    /// Forward-model failures seen so far (counted as `-inf` likelihood).
    pub fn failures(&self) -> usize {
        self.failures.load(Ordering::Relaxed)
    }

    pub fn evaluations(&self) -> usize {
        self.evaluations.load(Ordering::Relaxed)
    }

    /// Model temperature (rebased to the observation reference period) and CO2 on observation years.
    pub fn simulate(&self, theta: &ParameterVector) -> Result<(Vec<f64>, Vec<f64>)> {
        let init = ClimateState::zero(self.history.pathway.first_year() - 1);
        let out = self.model.run(
            &self.history.pathway,
            theta,
            &self.history.exogenous_forcing,
            &init,
        )?;
        let offset = match self.reference_index {
            Some((a, b)) => out.temperature[a..=b].iter().sum::<f64>() / (b - a + 1) as f64,
            None => 0.0,
        };
        let t = self
            .obs_index
            .iter()
            .map(|&i| out.temperature[i] - offset)
            .collect();
        let c = self.obs_index.iter().map(|&i| out.co2_ppm[i]).collect();
        Ok((t, c))
    }

    /// Gaussian log-likelihood of the observations; `-inf` (and a counted failure)
    /// if the forward model leaves its domain.
    pub fn log_likelihood(&self, theta: &ParameterVector) -> f64 {
        self.evaluations.fetch_add(1, Ordering::Relaxed);
        let (t, c) = match self.simulate(theta) {
            Ok(v) => v,
            Err(_) => {
                self.failures.fetch_add(1, Ordering::Relaxed);
                return f64::NEG_INFINITY;
            }
        };
        let rt: Vec<f64> = t
            .iter()
            .zip(&self.obs.temperature)
            .filter_map(|(m, o)| o.map(|o| o - m))
            .collect();
        let mut ll = gaussian_log_likelihood(&rt, self.likelihood.temperature_sd);
        if let Some(sd) = self.likelihood.co2_sd {
            let rc: Vec<f64> = c
                .iter()
                .zip(&self.obs.co2_ppm)
                .filter_map(|(m, o)| o.map(|o| o - m))
                .collect();
            ll += gaussian_log_likelihood(&rc, sd);
        }
        if ll.is_nan() {
            self.failures.fetch_add(1, Ordering::Relaxed);
            return f64::NEG_INFINITY;
        }
        ll
    }

    pub fn log_posterior(&self, theta: &ParameterVector) -> f64 {
        let lp = self.prior.log_prior(theta);
        if lp == f64::NEG_INFINITY {
            return lp;
        }
        lp + self.log_likelihood(theta)
    }

    /// Samples the posterior with DRAM, starting from `init` or the prior mode.
    ///
    /// Without an explicit initial proposal the per-parameter SDs are 2% of
    /// the prior scales.
    pub fn calibrate(
        &self,
        cfg: &DramConfig,
        init: Option<ParameterVector>,
        progress: impl FnMut(usize),
    ) -> Result<PosteriorChain> {
        let init = init.unwrap_or_else(|| self.prior.mode());
        let mut cfg = cfg.clone();
        if cfg.initial_sd.is_none() {
            cfg.initial_sd = Some(self.prior.scales().iter().map(|s| 0.02 * s).collect());
        }
        let chain = dram(
            |x| match ParameterVector::from_slice(x) {
                Ok(theta) => self.log_posterior(&theta),
                Err(_) => f64::NEG_INFINITY,
            },
            &init.0,
            &cfg,
            progress,
        )?;
        let mut chain = chain.with_parameter_names();
        chain.id = Some(chain.content_id());
        Ok(chain)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_residuals_closed_form() {
        let n = 17;
        let sd: f64 = 0.3;
        let v = gaussian_log_likelihood(&vec![0.0; n], sd);
        let exact = -(n as f64) / 2.0 * (2.0 * std::f64::consts::PI * sd * sd).ln();
        assert!((v - exact).abs() < 1e-12);
    }

    #[test]
    fn doubling_sd_direction_depends_on_residual_spread() {
        let small = vec![0.05, -0.05, 0.05];
        let large = vec![2.0, -2.0, 2.0];
        let sd = 0.5;
        assert!(gaussian_log_likelihood(&large, 2.0 * sd) > gaussian_log_likelihood(&large, sd));
        assert!(gaussian_log_likelihood(&small, 2.0 * sd) < gaussian_log_likelihood(&small, sd));
    }
}
