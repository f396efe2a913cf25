//! Monte-Carlo propagation of parameter and emission uncertainty.
//!
//! Every ensemble member `k` draws its parameters from random stream `2k` and
//! its emission error from stream `2k + 1` of a ChaCha generator keyed by the
//! root seed. Members are therefore independent of thread count and ordering,
//! and two propagations with the same seed share their random numbers
//! (parameter-only, emission-only and combined runs see the same draws).

mod band;
mod emission;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::{PosteriorChain, PriorSpec};
use crate::error::{Error, Result};
use crate::fair::{ClimateState, FairConfig, FairModel, ParameterVector};
use crate::gases::SchemaMode;
use crate::scenario::{EmissionPathway, Scenario, DEFAULT_CO2_FLOOR};

pub use band::{quantile_sorted, BandLevel, CredibleBand, Provenance, DEFAULT_LEVELS};
pub use emission::{
    perturb_pathway, perturb_pathway_from, perturb_percent, sample_offset, EmissionFamily,
    EmissionUncertaintySpec, Perturbed,
};

/// Where ensemble parameter vectors come from.
#[derive(Debug, Clone, Copy)]
pub enum ParameterSource<'a> {
    Fixed(ParameterVector),
    /// Uniform draws with replacement from the retained samples.
    Chain(&'a PosteriorChain),
    Prior(&'a PriorSpec),
}

impl ParameterSource<'_> {
    pub fn is_random(&self) -> bool {
        !matches!(self, ParameterSource::Fixed(_))
    }

    pub fn label(&self) -> String {
        match self {
            ParameterSource::Fixed(_) => "fixed".into(),
            ParameterSource::Chain(c) => c.id.clone().unwrap_or_else(|| c.content_id()),
            ParameterSource::Prior(_) => "prior".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PropagationConfig {
    pub n: usize,
    pub levels: Vec<f64>,
    pub seed: u64,
    /// First year to which emission errors apply.
    pub base_year: i32,
    pub co2_floor: f64,
    pub max_failure_fraction: f64,
    pub fair: FairConfig,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        PropagationConfig {
            n: 1000,
            levels: DEFAULT_LEVELS.to_vec(),
            seed: 0,
            base_year: 2020,
            co2_floor: DEFAULT_CO2_FLOOR,
            max_failure_fraction: 0.01,
            fair: FairConfig::default(),
        }
    }
}

fn stream(seed: u64, s: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(s);
    rng
}

/// Parameter vector of ensemble member `k`.
pub fn draw_parameter(source: &ParameterSource, seed: u64, k: usize) -> Result<ParameterVector> {
    let mut rng = stream(seed, 2 * k as u64);
    match source {
        ParameterSource::Fixed(p) => Ok(*p),
        ParameterSource::Prior(spec) => Ok(spec.sample(&mut rng)),
        ParameterSource::Chain(chain) => {
            let n = chain.n_retained();
            if n == 0 {
                return Err(Error::Data("chain has no retained samples".into()));
            }
            chain.parameter(rng.random_range(0..n))
        }
    }
}

/// Emission percentage error of ensemble member `k`.
pub fn draw_percent(spec: &EmissionUncertaintySpec, seed: u64, k: usize) -> f64 {
    let mut rng = stream(spec.seed.unwrap_or(seed), 2 * k as u64 + 1);
    spec.sample_percent(&mut rng)
}

/// Applies a percentage error to a pathway from `base_year` on.
///
/// Single-gas pathways get the offset `(p / 100) * E(base_year)` on CO2;
/// multigas pathways shift every gas by `p` percent of its own base-year value.
pub fn apply_percent(
    pathway: &EmissionPathway,
    percent: f64,
    base_year: i32,
    co2_floor: f64,
) -> Result<Perturbed> {
    match pathway.schema().mode() {
        SchemaMode::Co2e => {
            let b = pathway
                .index_of_year(base_year)
                .ok_or_else(|| Error::Data(format!("base year {base_year} not in pathway")))?;
            let offset = percent / 100.0 * pathway.co2_series()[b];
            Ok(perturb_pathway_from(pathway, offset, base_year, co2_floor))
        }
        SchemaMode::Multigas => perturb_percent(pathway, percent, base_year, co2_floor),
    }
}

/// Raw temperature ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub years: Vec<i32>,
    pub members: Vec<Vec<f64>>,
    pub failures: usize,
    pub clamped_cells: usize,
    pub provenance: Provenance,
}

impl Ensemble {
    pub fn band(&self, levels: &[f64]) -> Result<CredibleBand> {
        let mut b = CredibleBand::from_ensemble(self.years.clone(), &self.members, levels, self.provenance)?;
        b.failures = self.failures;
        b.clamped_cells = self.clamped_cells;
        Ok(b)
    }
}

pub fn provenance(source: &ParameterSource, spec: Option<&EmissionUncertaintySpec>) -> Provenance {
    match (source.is_random(), spec.is_some()) {
        (false, false) => Provenance::Deterministic,
        (true, false) => Provenance::ParameterOnly,
        (false, true) => Provenance::EmissionOnly,
        (true, true) => Provenance::Combined,
    }
}

/// Runs `cfg.n` members over the whole scenario.
pub fn run_ensemble(
    scenario: &Scenario,
    source: &ParameterSource,
    spec: Option<&EmissionUncertaintySpec>,
    cfg: &PropagationConfig,
) -> Result<Ensemble> {
    if cfg.n == 0 {
        return Err(Error::Config("ensemble size must be positive".into()));
    }
    if let Some(s) = spec {
        s.validate()?;
    }
    let mut fair = cfg.fair.clone();
    if fair.reference_emissions.is_none() {
        fair.reference_emissions = Some(scenario.pathway.row(0).to_vec());
    }
    let model = FairModel::new(fair, scenario.pathway.schema().clone())?;
    let init = ClimateState::zero(scenario.pathway.first_year() - 1);

    let results: Vec<Result<(Vec<f64>, usize)>> = (0..cfg.n)
        .into_par_iter()
        .map(|k| {
            let theta = draw_parameter(source, cfg.seed, k)?;
            let (pathway, clamped) = match spec {
                Some(s) => {
                    let p = draw_percent(s, cfg.seed, k);
                    let r = apply_percent(&scenario.pathway, p, cfg.base_year, cfg.co2_floor)?;
                    (std::borrow::Cow::Owned(r.pathway), r.clamped)
                }
                None => (std::borrow::Cow::Borrowed(&scenario.pathway), 0),
            };
            let out = model.run(&pathway, &theta, &scenario.exogenous_forcing, &init)?;
            Ok((out.temperature, clamped))
        })
        .collect();

    let mut members = Vec::with_capacity(cfg.n);
    let mut failures = 0;
    let mut clamped_cells = 0;
    let mut first_error = None;
    for r in results {
        match r {
            Ok((t, c)) => {
                members.push(t);
                clamped_cells += c;
            }
            Err(e @ (Error::Config(_) | Error::Data(_))) => return Err(e),
            Err(e) => {
                failures += 1;
                first_error.get_or_insert(e);
            }
        }
    }
    if failures as f64 > cfg.max_failure_fraction * cfg.n as f64 {
        return Err(Error::ForwardFailures {
            failed: failures,
            total: cfg.n,
            limit_pct: 100.0 * cfg.max_failure_fraction,
        });
    }
    Ok(Ensemble {
        years: scenario.pathway.years().to_vec(),
        members,
        failures,
        clamped_cells,
        provenance: provenance(source, spec),
    })
}

/// Samples parameters and/or emission errors, runs the model per draw and
/// reduces the temperature ensemble to a credible band.
pub fn propagate(
    scenario: &Scenario,
    source: &ParameterSource,
    spec: Option<&EmissionUncertaintySpec>,
    cfg: &PropagationConfig,
) -> Result<CredibleBand> {
    if cfg.n < 100 {
        return Err(Error::Config(format!(
            "propagation needs at least 100 draws, got {}",
            cfg.n
        )));
    }
    run_ensemble(scenario, source, spec, cfg)?.band(&cfg.levels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gases::GasSchema;

    fn toy_scenario() -> Scenario {
        let years: Vec<i32> = (1900..=2100).collect();
        let data = years.iter().map(|&y| if y < 2020 { 2.0 } else { 10.0 }).collect();
        Scenario::new(
            "toy",
            EmissionPathway::new(GasSchema::co2e(), years, data).unwrap(),
            None,
        )
        .unwrap()
    }

    #[test]
    fn fixed_theta_zero_sigma_is_deterministic_run() {
        let s = toy_scenario();
        let cfg = PropagationConfig {
            n: 100,
            ..Default::default()
        };
        let theta = ParameterVector::default();
        let spec = EmissionUncertaintySpec::normal(0.0, 0.0);
        let band = propagate(&s, &ParameterSource::Fixed(theta), Some(&spec), &cfg).unwrap();
        let det = FairModel::new(
            FairConfig {
                reference_emissions: Some(s.pathway.row(0).to_vec()),
                ..Default::default()
            },
            GasSchema::co2e(),
        )
        .unwrap()
        .run_scenario(&s, &theta)
        .unwrap();
        assert_eq!(band.median, det.temperature);
        assert_eq!(band.levels[1].upper, det.temperature);
    }

    #[test]
    fn streams_are_common_across_modes() {
        let spec = EmissionUncertaintySpec::normal(1.0, 13.0);
        let prior = PriorSpec::fair_default();
        let a = draw_parameter(&ParameterSource::Prior(&prior), 5, 17).unwrap();
        let b = draw_parameter(&ParameterSource::Prior(&prior), 5, 17).unwrap();
        assert_eq!(a, b);
        assert_eq!(draw_percent(&spec, 5, 3), draw_percent(&spec, 5, 3));
        assert_ne!(draw_percent(&spec, 5, 3), draw_percent(&spec, 5, 4));
    }

    #[test]
    fn too_few_draws_rejected() {
        let cfg = PropagationConfig {
            n: 10,
            ..Default::default()
        };
        let r = propagate(
            &toy_scenario(),
            &ParameterSource::Fixed(ParameterVector::default()),
            None,
            &cfg,
        );
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn emission_band_widens_after_base_year_only() {
        let s = toy_scenario();
        let cfg = PropagationConfig {
            n: 200,
            ..Default::default()
        };
        let spec = EmissionUncertaintySpec::lognormal(1.0, 13.0);
        let b = propagate(
            &s,
            &ParameterSource::Fixed(ParameterVector::default()),
            Some(&spec),
            &cfg,
        )
        .unwrap();
        assert_eq!(b.width(0.9, 2019), Some(0.0));
        assert!(b.width(0.9, 2060).unwrap() < b.width(0.9, 2100).unwrap());
        assert_eq!(b.provenance, Provenance::EmissionOnly);
    }
}
