//! Shared immutable state and the computations behind both the HTTP API and the CLI.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use tempalign::calibration::{
    diagnostics, CalibrationProblem, DramConfig, LikelihoodConfig, PosteriorChain, PriorSpec,
};
use tempalign::emulator::{EmulatorModel, ScenarioPrediction};
use tempalign::fair::{FairConfig, ParameterVector};
use tempalign::scenario::{ObservationSeries, ScenarioInfo, ScenarioStore, SectorShares};
use tempalign::socioecon::{
    baseline_temperature, implied_temperature, portfolio_global_pathway, BenchmarkEnsemble, Portfolio,
    ScopeMask, SectorAdjustment, TemperatureSummary,
};
use tempalign::uncertainty::{CredibleBand, EmissionUncertaintySpec, ParameterSource, PropagationConfig};
use tempalign::DataBundle;

use crate::error::{ServiceError, ServiceResult};

pub const DEFAULT_BENCHMARK: &str = "stoxx600_iron_steel_2022";
pub const DEFAULT_HISTORY: &str = "SSP2-RCP4.5";

/// Hex SHA-256 of the canonical (key-sorted) JSON form of `value`.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("serializable config");
    hex::encode(Sha256::digest(v.to_string().as_bytes()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Mcmc,
    Emulator,
}

fn default_n() -> usize {
    1000
}

/// Body of an alignment request.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlignRequest {
    /// Portfolio JSON; validated field by field.
    pub portfolio: serde_json::Value,
    /// Scenario ids; empty means every loaded scenario.
    #[serde(default)]
    pub scenarios: Vec<String>,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub uncertainty: Option<EmissionUncertaintySpec>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default)]
    pub scopes: ScopeMask,
    /// Chain id, `prior`, or `fixed`; defaults to the most recent chain.
    #[serde(default)]
    pub chain: Option<String>,
    /// Benchmark ensemble JSON; defaults to the bundled one.
    #[serde(default)]
    pub benchmark: Option<serde_json::Value>,
    /// Include full yearly bands in the response.
    #[serde(default = "yes")]
    pub bands: bool,
}

fn yes() -> bool {
    true
}

impl AlignRequest {
    pub fn new(portfolio: &Portfolio) -> Self {
        AlignRequest {
            portfolio: serde_json::to_value(portfolio).expect("portfolio serializes"),
            scenarios: Vec::new(),
            mode: Mode::Mcmc,
            uncertainty: None,
            seed: 0,
            n: default_n(),
            scopes: ScopeMask::ALL,
            chain: None,
            benchmark: None,
            bands: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignProvenance {
    pub mode: Mode,
    /// Chain id, `prior`, `fixed`, or emulator model id.
    pub source: String,
    pub seed: u64,
    pub n: usize,
    pub scopes: ScopeMask,
    pub config_hash: String,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioAlignment {
    pub scenario: String,
    pub baseline: Vec<TemperatureSummary>,
    pub portfolio: Vec<TemperatureSummary>,
    pub sectors: Vec<SectorAdjustment>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub band: Option<CredibleBand>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prediction: Option<ScenarioPrediction>,
}

/// One line of the scenario / baseline / portfolio table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scenario: String,
    pub year: i32,
    pub baseline_mean: f64,
    pub portfolio_mean: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignResponse {
    pub provenance: AlignProvenance,
    pub summary: Vec<SummaryRow>,
    pub results: Vec<ScenarioAlignment>,
    pub warnings: Vec<String>,
}

/// Body of a calibration request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateRequest {
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default)]
    pub seed: u64,
    /// Scenario supplying the historical emissions.
    #[serde(default = "default_history")]
    pub history: String,
    /// Observation noise; defaults to the values declared with the data.
    #[serde(default)]
    pub temperature_sd: Option<f64>,
    /// Include CO2 residuals with this SD (ppm).
    #[serde(default)]
    pub co2_sd: Option<f64>,
    #[serde(default)]
    pub priors: Option<PriorSpec>,
}

fn default_iterations() -> usize {
    10_000
}

fn default_history() -> String {
    DEFAULT_HISTORY.into()
}

impl Default for CalibrateRequest {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationOutcome {
    pub chain_id: String,
    pub path: Option<PathBuf>,
    pub acceptance_rate: f64,
    pub n_retained: usize,
    pub forward_failures: usize,
    pub non_stationary: bool,
    pub config_hash: String,
}

/// Data and artifacts shared by all requests.
///
/// Scenarios, sector shares, benchmark and observations never change after
/// construction. Chains and emulators are added as new immutable snapshots.
#[derive(Debug)]
pub struct Engine {
    pub store: Arc<ScenarioStore>,
    pub shares: Arc<SectorShares>,
    pub benchmark: Arc<BenchmarkEnsemble>,
    pub observations: Option<Arc<ObservationSeries>>,
    pub artifacts: Option<PathBuf>,
    chains: RwLock<BTreeMap<String, Arc<PosteriorChain>>>,
    latest_chain: RwLock<Option<String>>,
    emulator: RwLock<Option<Arc<EmulatorModel>>>,
}

impl Engine {
    pub fn new(
        store: ScenarioStore,
        shares: SectorShares,
        benchmark: BenchmarkEnsemble,
        observations: Option<ObservationSeries>,
        artifacts: Option<PathBuf>,
    ) -> Self {
        Engine {
            store: Arc::new(store),
            shares: Arc::new(shares),
            benchmark: Arc::new(benchmark),
            observations: observations.map(Arc::new),
            artifacts,
            chains: RwLock::new(BTreeMap::new()),
            latest_chain: RwLock::new(None),
            emulator: RwLock::new(None),
        }
    }

    /// Loads everything from a data bundle; artifacts (chains, emulators) go to `artifacts`.
    pub fn from_bundle(bundle: &DataBundle, artifacts: Option<PathBuf>) -> ServiceResult<Self> {
        let engine = Engine::new(
            bundle.scenarios()?,
            bundle.sector_shares()?,
            BenchmarkEnsemble::load(bundle.portfolio_path(DEFAULT_BENCHMARK))?,
            Some(bundle.observations()?),
            artifacts,
        );
        engine.load_latest_artifacts();
        Ok(engine)
    }

    fn load_latest_artifacts(&self) {
        let Some(dir) = &self.artifacts else { return };
        if let Some(id) = read_latest(&dir.join("chains")) {
            if let Ok(c) = PosteriorChain::load(dir.join("chains").join(&id)) {
                self.add_chain(c);
            }
        }
        if let Some(id) = read_latest(&dir.join("emulators")) {
            if let Ok(m) = EmulatorModel::load(dir.join("emulators").join(&id)) {
                self.set_emulator(m);
            }
        }
    }

    pub fn scenario_catalog(&self) -> Vec<ScenarioInfo> {
        self.store.catalog()
    }

    /// Registers a chain and makes it the default.
    pub fn add_chain(&self, chain: PosteriorChain) -> String {
        let id = chain.id.clone().unwrap_or_else(|| chain.content_id());
        self.chains.write().unwrap().insert(id.clone(), Arc::new(chain));
        *self.latest_chain.write().unwrap() = Some(id.clone());
        id
    }

    pub fn chain(&self, id: &str) -> Option<Arc<PosteriorChain>> {
        self.chains.read().unwrap().get(id).cloned()
    }

    pub fn latest_chain(&self) -> Option<Arc<PosteriorChain>> {
        let id = self.latest_chain.read().unwrap().clone()?;
        self.chain(&id)
    }

    pub fn set_emulator(&self, model: EmulatorModel) {
        *self.emulator.write().unwrap() = Some(Arc::new(model));
    }

    pub fn emulator(&self) -> Option<Arc<EmulatorModel>> {
        self.emulator.read().unwrap().clone()
    }

    fn scenario_ids(&self, requested: &[String]) -> ServiceResult<Vec<String>> {
        if requested.is_empty() {
            return Ok(self.store.ids());
        }
        let unknown: Vec<String> = requested
            .iter()
            .filter(|id| self.store.get(id).is_none())
            .map(|id| format!("scenarios: unknown scenario '{id}'"))
            .collect();
        if unknown.is_empty() {
            Ok(requested.to_vec())
        } else {
            Err(ServiceError::Invalid(unknown))
        }
    }

    /// Validates the request and returns the parsed portfolio and benchmark.
    pub fn check_align(&self, req: &AlignRequest) -> ServiceResult<(Portfolio, Arc<BenchmarkEnsemble>)> {
        let mut problems = Vec::new();
        let portfolio = match serde_json::from_value::<Portfolio>(req.portfolio.clone()) {
            Ok(p) => {
                problems.extend(p.problems().into_iter().map(|m| format!("portfolio.{m}")));
                Some(p)
            }
            Err(e) => {
                problems.push(format!("portfolio: {e}"));
                None
            }
        };
        let benchmark = match &req.benchmark {
            None => Some(self.benchmark.clone()),
            Some(v) => match serde_json::from_value::<BenchmarkEnsemble>(v.clone()) {
                Ok(b) => match b.validate() {
                    Ok(()) => Some(Arc::new(b)),
                    Err(e) => {
                        problems.push(format!("benchmark: {e}"));
                        None
                    }
                },
                Err(e) => {
                    problems.push(format!("benchmark: {e}"));
                    None
                }
            },
        };
        if req.mode == Mode::Mcmc && req.n < 100 {
            problems.push(format!("n: at least 100 draws are needed, got {}", req.n));
        }
        if let Some(u) = &req.uncertainty {
            if let Err(e) = u.validate() {
                problems.push(format!("uncertainty: {e}"));
            }
        }
        if let Err(ServiceError::Invalid(v)) = self.scenario_ids(&req.scenarios) {
            problems.extend(v);
        }
        match (portfolio, benchmark) {
            (Some(p), Some(b)) if problems.is_empty() => Ok((p, b)),
            _ => Err(ServiceError::Invalid(problems)),
        }
    }

    fn parameter_source(&self, chain: Option<&str>) -> ServiceResult<(Source, String)> {
        match chain {
            Some("prior") => Ok((Source::Prior(PriorSpec::fair_default()), "prior".into())),
            Some("fixed") => Ok((Source::Fixed(ParameterVector::default()), "fixed".into())),
            Some(id) => {
                let c = self
                    .chain(id)
                    .ok_or_else(|| ServiceError::NotFound(format!("chain '{id}'")))?;
                Ok((Source::Chain(c), id.to_string()))
            }
            None => {
                let c = self.latest_chain().ok_or_else(|| {
                    ServiceError::Unavailable("no calibrated chain is loaded; run a calibration first".into())
                })?;
                let id = c.id.clone().unwrap_or_else(|| c.content_id());
                Ok((Source::Chain(c), id))
            }
        }
    }

    /// Implied temperature of a portfolio per scenario, with the unmodified scenario as baseline.
    pub fn align(&self, req: &AlignRequest) -> ServiceResult<AlignResponse> {
        let (portfolio, benchmark) = self.check_align(req)?;
        let ids = self.scenario_ids(&req.scenarios)?;
        match req.mode {
            Mode::Mcmc => self.align_mcmc(req, &portfolio, &benchmark, &ids),
            Mode::Emulator => self.align_emulator(req, &portfolio, &benchmark, &ids),
        }
    }

    fn align_mcmc(
        &self,
        req: &AlignRequest,
        portfolio: &Portfolio,
        benchmark: &BenchmarkEnsemble,
        ids: &[String],
    ) -> ServiceResult<AlignResponse> {
        let (source, label) = self.parameter_source(req.chain.as_deref())?;
        let source = source.as_ref();
        let cfg = PropagationConfig {
            n: req.n,
            seed: req.seed,
            ..Default::default()
        };
        let spec = req.uncertainty.as_ref();
        let mut results = Vec::new();
        let mut summary = Vec::new();
        for id in ids {
            let s = self.store.get(id).expect("checked scenario");
            let base = baseline_temperature(&s, &source, spec, &cfg)?;
            let a = implied_temperature(
                portfolio,
                benchmark,
                &s,
                &self.shares,
                req.scopes,
                &source,
                spec,
                &cfg,
            )?;
            summary.extend(summary_rows(id, &base.summaries, &a.summaries));
            results.push(ScenarioAlignment {
                scenario: id.clone(),
                baseline: base.summaries,
                portfolio: a.summaries,
                sectors: a.sectors,
                band: req.bands.then_some(a.band),
                prediction: None,
            });
        }
        Ok(AlignResponse {
            provenance: self.provenance(req, label),
            summary,
            results,
            warnings: Vec::new(),
        })
    }

    fn align_emulator(
        &self,
        req: &AlignRequest,
        portfolio: &Portfolio,
        benchmark: &BenchmarkEnsemble,
        ids: &[String],
    ) -> ServiceResult<AlignResponse> {
        let model = self
            .emulator()
            .ok_or_else(|| ServiceError::Unavailable("no emulator model is loaded".into()))?;
        let missing: Vec<String> = ids
            .iter()
            .filter(|id| !model.meta.scenarios.contains(id))
            .map(|id| format!("scenarios: '{id}' is not covered by emulator {}", model.id()))
            .collect();
        if !missing.is_empty() {
            return Err(ServiceError::Invalid(missing));
        }
        let mut warnings = Vec::new();
        if req.uncertainty.is_some() {
            warnings.push("emission uncertainty is ignored in emulator mode".to_string());
        }
        if portfolio.base_year != model.meta.base_year {
            warnings.push(format!(
                "portfolio base year {} differs from the emulator base year {}",
                portfolio.base_year, model.meta.base_year
            ));
        }
        // scale of base-year CO2e implied by the portfolio, on the emulator's reference scenario
        let reference = self.store.get(&model.meta.reference_scenario).ok_or_else(|| {
            ServiceError::Unavailable(format!("reference scenario '{}'", model.meta.reference_scenario))
        })?;
        let mut p = portfolio.clone();
        p.base_year = model.meta.base_year;
        let global = portfolio_global_pathway(&p, benchmark, &reference, &self.shares, req.scopes)?;
        let bi = reference
            .pathway
            .index_of_year(model.meta.base_year)
            .expect("base year in reference");
        let schema = reference.pathway.schema();
        let k = schema.co2e_total(global.pathway.row(bi)) / schema.co2e_total(reference.pathway.row(bi));

        let base = model.predict(&model.input_for_scale(1.0))?;
        let pred = model.predict(&model.input_for_scale(k))?;
        warnings.extend(pred.warning.clone());
        let mut results = Vec::new();
        let mut summary = Vec::new();
        for id in ids {
            let b = base.scenario(id).expect("checked scenario");
            let p = pred.scenario(id).expect("checked scenario");
            let (bs, ps) = (prediction_summaries(b), prediction_summaries(p));
            summary.extend(summary_rows(id, &bs, &ps));
            results.push(ScenarioAlignment {
                scenario: id.clone(),
                baseline: bs,
                portfolio: ps,
                sectors: global.sectors.clone(),
                band: None,
                prediction: req.bands.then(|| p.clone()),
            });
        }
        Ok(AlignResponse {
            provenance: self.provenance(req, model.id().to_string()),
            summary,
            results,
            warnings,
        })
    }

    fn provenance(&self, req: &AlignRequest, source: String) -> AlignProvenance {
        AlignProvenance {
            mode: req.mode,
            source,
            seed: req.seed,
            n: req.n,
            scopes: req.scopes,
            config_hash: config_hash(req),
            version: env!("CARGO_PKG_VERSION").into(),
        }
    }

    /// Validates a calibration request without running it.
    pub fn check_calibrate(&self, req: &CalibrateRequest) -> ServiceResult<()> {
        let mut problems = Vec::new();
        if req.iterations < 2_000 {
            problems.push(format!(
                "iterations: at least 2000 are needed, got {}",
                req.iterations
            ));
        }
        if self.store.get(&req.history).is_none() {
            problems.push(format!("history: unknown scenario '{}'", req.history));
        }
        if let Some(p) = &req.priors {
            if let Err(e) = p.validate() {
                problems.push(format!("priors: {e}"));
            }
        }
        for (name, v) in [("temperature_sd", req.temperature_sd), ("co2_sd", req.co2_sd)] {
            if v.is_some_and(|s| !(s > 0.0 && s.is_finite())) {
                problems.push(format!("{name}: must be positive"));
            }
        }
        if self.observations.is_none() {
            return Err(ServiceError::Unavailable("no observation data loaded".into()));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ServiceError::Invalid(problems))
        }
    }

    /// Runs DRAM; `progress` receives the completed fraction.
    pub fn calibrate(
        &self,
        req: &CalibrateRequest,
        mut progress: impl FnMut(f64),
    ) -> ServiceResult<(PosteriorChain, CalibrationOutcome)> {
        self.check_calibrate(req)?;
        let obs = self.observations.as_ref().expect("checked").as_ref().clone();
        let history = self.store.get(&req.history).expect("checked");
        let likelihood = LikelihoodConfig {
            temperature_sd: req.temperature_sd.unwrap_or(obs.temperature_noise_sd),
            co2_sd: req.co2_sd,
        };
        let prior = req.priors.clone().unwrap_or_else(PriorSpec::fair_default);
        let problem = CalibrationProblem::new(&history, obs, likelihood, prior, FairConfig::default())?;
        let cfg = DramConfig {
            n_iter: req.iterations,
            seed: req.seed,
            ..Default::default()
        };
        let n = req.iterations as f64;
        let chain = problem.calibrate(&cfg, None, |it| {
            if it % 500 == 0 || it == req.iterations {
                progress(it as f64 / n)
            }
        })?;
        let report = diagnostics(&chain);
        let hash = config_hash(req);
        let id = chain.id.clone().unwrap_or_else(|| chain.content_id());
        let path = match &self.artifacts {
            Some(dir) => {
                let d = dir.join("chains");
                std::fs::create_dir_all(&d).map_err(|e| tempalign::Error::Io {
                    path: d.clone(),
                    source: e,
                })?;
                chain.save(d.join(&id), serde_json::to_value(req).expect("serializable"))?;
                write_latest(&d, &id)?;
                Some(d.join(format!("{id}.chain")))
            }
            None => None,
        };
        let outcome = CalibrationOutcome {
            chain_id: id,
            path,
            acceptance_rate: chain.acceptance_rate,
            n_retained: chain.n_retained(),
            forward_failures: problem.failures(),
            non_stationary: report.non_stationary,
            config_hash: hash,
        };
        Ok((chain, outcome))
    }
}

/// Owned parameter source, convertible to the borrowed form the library takes.
pub enum Source {
    Fixed(ParameterVector),
    Prior(PriorSpec),
    Chain(Arc<PosteriorChain>),
}

impl Source {
    pub fn as_ref(&self) -> ParameterSource<'_> {
        match self {
            Source::Fixed(p) => ParameterSource::Fixed(*p),
            Source::Prior(p) => ParameterSource::Prior(p),
            Source::Chain(c) => ParameterSource::Chain(c),
        }
    }
}

fn summary_rows(id: &str, base: &[TemperatureSummary], port: &[TemperatureSummary]) -> Vec<SummaryRow> {
    base.iter()
        .zip(port)
        .map(|(b, p)| SummaryRow {
            scenario: id.to_string(),
            year: b.year,
            baseline_mean: b.mean,
            portfolio_mean: p.mean,
            delta: p.mean - b.mean,
        })
        .collect()
}

fn prediction_summaries(p: &ScenarioPrediction) -> Vec<TemperatureSummary> {
    tempalign::socioecon::SUMMARY_YEARS
        .iter()
        .filter_map(|&y| {
            p.at(y).map(|(mean, median, lo, hi)| TemperatureSummary {
                year: y,
                mean,
                median,
                lo90: Some(lo),
                hi90: Some(hi),
            })
        })
        .collect()
}

pub fn read_latest(dir: &Path) -> Option<String> {
    std::fs::read_to_string(dir.join("latest"))
        .ok()
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
}

pub fn write_latest(dir: &Path, id: &str) -> ServiceResult<()> {
    let p = dir.join("latest");
    std::fs::write(&p, id).map_err(|e| tempalign::Error::Io { path: p, source: e })?;
    Ok(())
}
