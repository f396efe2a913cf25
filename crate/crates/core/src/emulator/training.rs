//! Label generation: Monte-Carlo bands for a grid of base-year emission scalings.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fair::{ClimateState, FairModel, ParameterVector};
use crate::scenario::{EmissionPathway, Scenario};
use crate::uncertainty::{
    apply_percent, draw_parameter, draw_percent, quantile_sorted, EmissionUncertaintySpec, ParameterSource,
    PropagationConfig,
};

/// Summaries stored per scenario and year, in this order.
pub const QUANTITIES: [&str; 4] = ["mean", "median", "q05", "q95"];

/// What a grid of labels is computed from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    /// Multipliers of every gas from `base_year` on.
    pub scales: Vec<f64>,
    /// First output year; emissions are scaled from here.
    pub base_year: i32,
    /// Draws per grid point come from `propagation.n`; `propagation.seed` fixes them.
    pub propagation: PropagationConfig,
}

impl GenerationConfig {
    /// `n` evenly spaced scales on `[lo, hi]`.
    pub fn grid(lo: f64, hi: f64, n: usize, base_year: i32, propagation: PropagationConfig) -> Self {
        let scales = match n {
            0 => vec![],
            1 => vec![lo],
            _ => (0..n)
                .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
                .collect(),
        };
        GenerationConfig {
            scales,
            base_year,
            propagation,
        }
    }
}

/// Inputs and band-summary labels for emulator training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSet {
    /// One input vector per grid point (base-year CO2e of the reference scenario, Gt/yr).
    pub inputs: Vec<Vec<f64>>,
    /// Label `((s * n_years) + t) * 4 + q` for scenario `s`, year `t`, quantity `q`.
    pub labels: Vec<Vec<f64>>,
    pub scales: Vec<f64>,
    pub scenarios: Vec<String>,
    pub years: Vec<i32>,
    pub base_year: i32,
    /// Scenario whose base-year CO2e defines the input axis.
    pub reference_scenario: String,
    pub reference_co2e: f64,
    pub n_draws: usize,
    pub seed: u64,
    pub source: String,
    /// Grid points dropped because too many forward runs failed.
    pub skipped: usize,
}

impl TrainingSet {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn label_index(&self, scenario: usize, year: usize, quantity: usize) -> usize {
        (scenario * self.years.len() + year) * QUANTITIES.len() + quantity
    }

    /// Checks finiteness and `q05 <= median <= q95`.
    pub fn validate(&self) -> Result<()> {
        if self.inputs.len() != self.labels.len() {
            return Err(Error::Data("inputs and labels differ in length".into()));
        }
        let width = self.scenarios.len() * self.years.len() * QUANTITIES.len();
        for (i, (x, y)) in self.inputs.iter().zip(&self.labels).enumerate() {
            if y.len() != width || x.iter().chain(y).any(|v| !v.is_finite()) {
                return Err(Error::Data(format!(
                    "grid point {i} has a malformed or non-finite label"
                )));
            }
            for c in y.chunks(4) {
                if !(c[2] <= c[1] && c[1] <= c[3]) {
                    return Err(Error::Data(format!("grid point {i} has unordered quantiles")));
                }
            }
        }
        Ok(())
    }

    /// Subset by row indices.
    pub fn select(&self, idx: &[usize]) -> Self {
        TrainingSet {
            inputs: idx.iter().map(|&i| self.inputs[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i].clone()).collect(),
            scales: idx.iter().map(|&i| self.scales[i]).collect(),
            ..self.clone()
        }
    }
}

fn scale_from(pathway: &EmissionPathway, k: f64, year: i32) -> EmissionPathway {
    let mut out = pathway.clone();
    let start = out.index_of_year(year).unwrap_or(0);
    for i in start..out.len() {
        out.row_mut(i).iter_mut().for_each(|v| *v *= k);
    }
    out
}

struct Cached {
    model: FairModel,
    tail: Scenario,
    states: Vec<Option<(ParameterVector, ClimateState, Option<f64>)>>,
}

/// Runs the ensemble for every scenario and grid scale and reduces each to
/// per-year mean, median, 5% and 95% quantiles.
///
/// Each draw's history up to the year before the first perturbed year is
/// integrated once and reused for every grid point. Draw `k` uses the same
/// parameter and emission random streams as member `k` of
/// [`crate::uncertainty::propagate`], so a grid point at scale 1 reproduces
/// the plain posterior-predictive band, and labels vary smoothly across the grid.
pub fn generate_training_set(
    source: &ParameterSource,
    scenarios: &[&Scenario],
    spec: Option<&EmissionUncertaintySpec>,
    cfg: &GenerationConfig,
) -> Result<TrainingSet> {
    let prop = &cfg.propagation;
    if scenarios.is_empty() || cfg.scales.is_empty() {
        return Err(Error::Config(
            "need at least one scenario and one grid scale".into(),
        ));
    }
    if prop.n == 0 {
        return Err(Error::Config("need at least one draw per grid point".into()));
    }
    if cfg.scales.iter().any(|k| !(k.is_finite() && *k >= 0.0)) {
        return Err(Error::Config(
            "grid scales must be finite and non-negative".into(),
        ));
    }
    if let Some(s) = spec {
        s.validate()?;
    }
    let split = match spec {
        Some(_) => cfg.base_year.min(prop.base_year),
        None => cfg.base_year,
    };
    let last = scenarios[0].pathway.last_year();
    let reference = &scenarios[0];
    let bi = reference
        .pathway
        .index_of_year(cfg.base_year)
        .ok_or_else(|| Error::Data(format!("base year {} not in '{}'", cfg.base_year, reference.id)))?;
    let reference_co2e = reference.pathway.co2e_series()[bi];

    let mut cached = Vec::with_capacity(scenarios.len());
    for s in scenarios {
        if s.pathway.last_year() != last || s.pathway.schema() != reference.pathway.schema() {
            return Err(Error::Data(format!(
                "scenario '{}' differs in schema or end year",
                s.id
            )));
        }
        let first = s.pathway.first_year();
        if split <= first || split > last {
            return Err(Error::Data(format!(
                "base year {split} not inside scenario '{}'",
                s.id
            )));
        }
        let mut fair = prop.fair.clone();
        if fair.reference_emissions.is_none() {
            fair.reference_emissions = Some(s.pathway.row(0).to_vec());
        }
        let model = FairModel::new(fair, s.pathway.schema().clone())?;
        let head = s.window(first, split - 1)?;
        let tail = s.window(split, last)?;
        let init = ClimateState::zero(first - 1);
        let states = (0..prop.n)
            .into_par_iter()
            .map(|k| {
                let theta = draw_parameter(source, prop.seed, k)?;
                let pct = spec.map(|sp| draw_percent(sp, prop.seed, k));
                Ok(model
                    .run(&head.pathway, &theta, &head.exogenous_forcing, &init)
                    .ok()
                    .map(|h| (theta, h.final_state, pct)))
            })
            .collect::<Result<Vec<_>>>()?;
        cached.push(Cached { model, tail, states });
    }

    let years: Vec<i32> = (cfg.base_year..=last).collect();
    let offset = (cfg.base_year - split) as usize;
    let mut out = TrainingSet {
        inputs: Vec::new(),
        labels: Vec::new(),
        scales: Vec::new(),
        scenarios: scenarios.iter().map(|s| s.id.clone()).collect(),
        years: years.clone(),
        base_year: cfg.base_year,
        reference_scenario: reference.id.clone(),
        reference_co2e,
        n_draws: prop.n,
        seed: prop.seed,
        source: source.label(),
        skipped: 0,
    };
    'grid: for &k in &cfg.scales {
        let mut label = Vec::with_capacity(scenarios.len() * years.len() * 4);
        for c in &cached {
            let scaled = scale_from(&c.tail.pathway, k, cfg.base_year);
            let members: Vec<Option<Vec<f64>>> = c
                .states
                .par_iter()
                .map(|st| {
                    let (theta, state, pct) = st.as_ref()?;
                    let path = match pct {
                        Some(p) => {
                            apply_percent(&scaled, *p, prop.base_year, prop.co2_floor)
                                .ok()?
                                .pathway
                        }
                        None => scaled.clone(),
                    };
                    let r = c.model.run(&path, theta, &c.tail.exogenous_forcing, state).ok()?;
                    Some(r.temperature[offset..].to_vec())
                })
                .collect();
            let ok: Vec<&Vec<f64>> = members.iter().flatten().collect();
            let failed = members.len() - ok.len();
            if ok.is_empty() || failed as f64 > prop.max_failure_fraction * members.len() as f64 {
                out.skipped += 1;
                continue 'grid;
            }
            let mut col = vec![0.0; ok.len()];
            for t in 0..years.len() {
                for (v, m) in col.iter_mut().zip(&ok) {
                    *v = m[t];
                }
                let mean = col.iter().sum::<f64>() / col.len() as f64;
                col.sort_by(f64::total_cmp);
                label.extend([
                    mean,
                    quantile_sorted(&col, 0.5),
                    quantile_sorted(&col, 0.05),
                    quantile_sorted(&col, 0.95),
                ]);
            }
        }
        out.inputs.push(vec![k * reference_co2e]);
        out.labels.push(label);
        out.scales.push(k);
    }
    if out.is_empty() {
        return Err(Error::Training(format!(
            "all {} grid points failed",
            cfg.scales.len()
        )));
    }
    Ok(out)
}
