use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gases::{ConcentrationGas, GasKind, GasSchema, Precursor, Species};
use crate::scenario::{EmissionPathway, Scenario};

use super::carbon::solve_alpha;
use super::forcing::{
    aerosol_forcing, ch4_forcing, co2_forcing, n2o_forcing, ozone_forcing, PrecursorEmissions,
    BC_SNOW_PER_MT, LANDUSE_PER_GTC, STRAT_H2O_FRACTION,
};
use super::ParameterVector;

/// Number of concentration-tracked non-CO2 gases (CH4, N2O and 28 halogenated species).
pub const N_CONC_GASES: usize = 30;

/// How emissions are distributed within a model year.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Timing {
    /// Emitted at a constant rate through the year; the reservoir and gas updates
    /// integrate the linear ODE exactly and the thermal boxes see the mean of the
    /// start- and end-of-year concentration forcing.
    #[default]
    Uniform,
    /// Emitted as a pulse at the end of the year (the classic annual-step
    /// convention); the thermal boxes see end-of-year forcing.
    EndOfYear,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaMode {
    /// Solve for alpha from uptake and temperature every year.
    #[default]
    Feedback,
    /// Hold alpha constant.
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FairConfig {
    /// Preindustrial CO2, ppm.
    pub c0: f64,
    /// GtC per ppm of atmospheric CO2.
    pub gtc_per_ppm: f64,
    /// Preindustrial CH4 and N2O, ppb.
    pub ch4_pi: f64,
    pub n2o_pi: f64,
    pub iirf_horizon: f64,
    pub iirf_max: f64,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub alpha_tol: f64,
    pub alpha: AlphaMode,
    pub timing: Timing,
    /// Emission row that produces no non-CO2 forcing; defaults to the first row of the driving pathway.
    pub reference_emissions: Option<Vec<f64>>,
}

impl Default for FairConfig {
    fn default() -> Self {
        FairConfig {
            c0: 278.0,
            gtc_per_ppm: 2.124,
            ch4_pi: 722.0,
            n2o_pi: 273.0,
            iirf_horizon: 100.0,
            iirf_max: 97.0,
            alpha_min: 1e-3,
            alpha_max: 1e3,
            alpha_tol: 1e-9,
            alpha: AlphaMode::Feedback,
            timing: Timing::Uniform,
            reference_emissions: None,
        }
    }
}

/// Model state at the end of `year`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClimateState {
    pub year: i32,
    /// Excess carbon in each reservoir, GtC.
    pub reservoirs: [f64; 4],
    pub cumulative_emissions: f64,
    /// Carbon taken up by sinks: cumulative emissions minus the reservoir total, GtC.
    pub cumulative_uptake: f64,
    pub cumulative_land_use: f64,
    /// Thermal box temperatures, K.
    pub thermal: [f64; 2],
    /// Excess concentration of CH4, N2O (ppb) and halogenated gases (ppt).
    #[serde(with = "gas_array")]
    pub gas_excess: [f64; N_CONC_GASES],
    /// Last solved alpha, used to warm-start the next solve (0 if none).
    pub alpha: f64,
}

mod gas_array {
    use super::N_CONC_GASES;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64; N_CONC_GASES], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[f64; N_CONC_GASES], D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        v.try_into()
            .map_err(|_| serde::de::Error::custom(format!("expected {N_CONC_GASES} gas values")))
    }
}

impl ClimateState {
    /// Unperturbed state at the end of `year`.
    pub fn zero(year: i32) -> Self {
        ClimateState {
            year,
            reservoirs: [0.0; 4],
            cumulative_emissions: 0.0,
            cumulative_uptake: 0.0,
            cumulative_land_use: 0.0,
            thermal: [0.0; 2],
            gas_excess: [0.0; N_CONC_GASES],
            alpha: 0.0,
        }
    }

    pub fn temperature(&self) -> f64 {
        self.thermal[0] + self.thermal[1]
    }

    pub fn reservoir_total(&self) -> f64 {
        self.reservoirs.iter().sum()
    }
}

/// Annual forcing per category, W m-2.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Forcing {
    pub co2: f64,
    pub ch4: f64,
    pub n2o: f64,
    pub aerosol: f64,
    pub ozone: f64,
    pub other: f64,
    pub exogenous: f64,
}

impl Forcing {
    pub fn total(&self) -> f64 {
        self.co2 + self.ch4 + self.n2o + self.aerosol + self.ozone + self.other + self.exogenous
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutput {
    pub temperature: f64,
    pub co2_ppm: f64,
    /// Forcing that drove the thermal update over the year.
    pub forcing: Forcing,
    pub alpha: f64,
    pub alpha_clamped: bool,
}

/// Per-category forcing series.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ForcingSeries {
    pub total: Vec<f64>,
    pub co2: Vec<f64>,
    pub ch4: Vec<f64>,
    pub n2o: Vec<f64>,
    pub aerosol: Vec<f64>,
    pub ozone: Vec<f64>,
    pub other: Vec<f64>,
    pub exogenous: Vec<f64>,
}

impl ForcingSeries {
    fn with_capacity(n: usize) -> Self {
        let v = || Vec::with_capacity(n);
        ForcingSeries {
            total: v(),
            co2: v(),
            ch4: v(),
            n2o: v(),
            aerosol: v(),
            ozone: v(),
            other: v(),
            exogenous: v(),
        }
    }

    fn push(&mut self, f: &Forcing) {
        self.total.push(f.total());
        self.co2.push(f.co2);
        self.ch4.push(f.ch4);
        self.n2o.push(f.n2o);
        self.aerosol.push(f.aerosol);
        self.ozone.push(f.ozone);
        self.other.push(f.other);
        self.exogenous.push(f.exogenous);
    }
}

/// Output of a forward run, one entry per pathway year.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemperaturePathway {
    pub years: Vec<i32>,
    /// Global-mean temperature anomaly at year end, K.
    pub temperature: Vec<f64>,
    pub co2_ppm: Vec<f64>,
    pub forcing: ForcingSeries,
    pub alpha: Vec<f64>,
    /// Years in which the alpha solve hit a bound.
    pub alpha_clamped: usize,
    pub final_state: ClimateState,
}

impl TemperaturePathway {
    pub fn at(&self, year: i32) -> Option<f64> {
        let i = year.checked_sub(*self.years.first()?)?;
        self.temperature.get(usize::try_from(i).ok()?).copied()
    }
}

#[derive(Debug, Clone)]
struct Layout {
    carbon: Vec<(usize, bool)>,
    conc: Vec<(usize, ConcentrationGas)>,
    precursors: Vec<(usize, Precursor)>,
    ch4_col: Option<usize>,
}

impl Layout {
    fn new(schema: &GasSchema) -> Self {
        let mut l = Layout {
            carbon: Vec::new(),
            conc: Vec::new(),
            precursors: Vec::new(),
            ch4_col: None,
        };
        for (i, g) in schema.gases().iter().enumerate() {
            match g.kind {
                GasKind::Carbon { land_use } => l.carbon.push((i, land_use)),
                GasKind::Concentration(c) => {
                    if c.species == Species::Methane {
                        l.ch4_col = Some(i);
                    }
                    l.conc.push((i, c));
                }
                GasKind::ShortLived(p) => l.precursors.push((i, p)),
            }
        }
        debug_assert!(l.conc.len() <= N_CONC_GASES);
        l
    }
}

/// Quantities fixed for a given parameter vector and reference row.
struct Prepared {
    a: [f64; 4],
    tau: [f64; 4],
    thermal_decay: [f64; 2],
    q: [f64; 2],
    gas_decay: Vec<f64>,
    gas_gain: Vec<f64>,
    reference: Vec<f64>,
    ref_precursors: PrecursorEmissions,
}

/// Annual-step forward model bound to a configuration and gas schema.
#[derive(Debug, Clone)]
pub struct FairModel {
    pub config: FairConfig,
    schema: GasSchema,
    layout: Layout,
}

impl FairModel {
    pub fn new(config: FairConfig, schema: GasSchema) -> Result<Self> {
        if let Some(r) = &config.reference_emissions {
            if r.len() != schema.len() {
                return Err(Error::Config(format!(
                    "reference emissions have {} entries, schema has {}",
                    r.len(),
                    schema.len()
                )));
            }
        }
        if !(config.alpha_min > 0.0 && config.alpha_min < config.alpha_max) {
            return Err(Error::Config("alpha bounds must satisfy 0 < min < max".into()));
        }
        if let AlphaMode::Fixed(a) = config.alpha {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::Config(format!("fixed alpha must be positive, got {a}")));
            }
        }
        Ok(FairModel {
            layout: Layout::new(&schema),
            config,
            schema,
        })
    }

    pub fn schema(&self) -> &GasSchema {
        &self.schema
    }

    fn prepare(&self, params: &ParameterVector, reference: &[f64]) -> Result<Prepared> {
        params.validate()?;
        let sc = self.config.timing == Timing::Uniform;
        let mut gas_decay = Vec::with_capacity(self.layout.conc.len());
        let mut gas_gain = Vec::with_capacity(self.layout.conc.len());
        for (_, g) in &self.layout.conc {
            let d = (-1.0 / g.lifetime).exp();
            gas_decay.push(d);
            let gain = if sc {
                g.lifetime * -(-1.0 / g.lifetime).exp_m1()
            } else {
                1.0
            };
            gas_gain.push(g.conc_per_emission * gain);
        }
        let [d1, d2] = params.d();
        let mut ref_precursors = PrecursorEmissions::default();
        for &(col, p) in &self.layout.precursors {
            ref_precursors.set(p, reference[col]);
        }
        Ok(Prepared {
            a: params.a(),
            tau: params.tau(),
            thermal_decay: [(-1.0 / d1).exp(), (-1.0 / d2).exp()],
            q: params.q(),
            gas_decay,
            gas_gain,
            reference: reference.to_vec(),
            ref_precursors,
        })
    }

    fn concentration_forcing(&self, state: &ClimateState, params: &ParameterVector) -> Result<[f64; 4]> {
        let cfg = &self.config;
        let c = cfg.c0 + state.reservoir_total() / cfg.gtc_per_ppm;
        if c <= 0.0 || !c.is_finite() {
            return Err(Error::Domain(format!(
                "CO2 concentration {c} ppm in {} is not positive",
                state.year
            )));
        }
        let co2 = co2_forcing(c, cfg.c0, params.f2x());
        let (mut ch4, mut n2o, mut halo) = (0.0, 0.0, 0.0);
        for (k, (_, g)) in self.layout.conc.iter().enumerate() {
            let x = state.gas_excess[k];
            match g.species {
                Species::Methane => {
                    let m = cfg.ch4_pi + x;
                    if m <= 0.0 {
                        return Err(Error::Domain(format!(
                            "CH4 concentration {m} ppb in {} is not positive",
                            state.year
                        )));
                    }
                    ch4 = ch4_forcing(m, cfg.ch4_pi, cfg.n2o_pi);
                }
                Species::NitrousOxide => {
                    let n = cfg.n2o_pi + x;
                    if n <= 0.0 {
                        return Err(Error::Domain(format!(
                            "N2O concentration {n} ppb in {} is not positive",
                            state.year
                        )));
                    }
                    n2o = n2o_forcing(n, cfg.ch4_pi, cfg.n2o_pi);
                }
                Species::Halogen => halo += g.radiative_efficiency * x / 1000.0,
            }
        }
        Ok([co2, ch4, n2o, halo])
    }

    fn step_prepared(
        &self,
        state: &ClimateState,
        emissions: &[f64],
        exo: f64,
        params: &ParameterVector,
        prep: &Prepared,
        start_forcing: &[f64; 4],
    ) -> Result<(ClimateState, StepOutput, [f64; 4])> {
        let cfg = &self.config;
        let (alpha, clamped) = match cfg.alpha {
            AlphaMode::Fixed(a) => (a, false),
            AlphaMode::Feedback => {
                let guess = (state.alpha > 0.0).then_some(state.alpha);
                let s = solve_alpha(state.cumulative_uptake, state.temperature(), params, cfg, guess)?;
                (s.alpha, s.clamped)
            }
        };

        let mut e_co2 = 0.0;
        let mut e_land = 0.0;
        for &(col, land) in &self.layout.carbon {
            e_co2 += emissions[col];
            if land {
                e_land += emissions[col];
            }
        }

        let mut next = *state;
        next.year = state.year + 1;
        next.alpha = alpha;
        for i in 0..4 {
            let k = 1.0 / (alpha * prep.tau[i]);
            let decay = (-k).exp();
            let input = match cfg.timing {
                Timing::Uniform => prep.a[i] * e_co2 * -(-k).exp_m1() / k,
                Timing::EndOfYear => prep.a[i] * e_co2,
            };
            next.reservoirs[i] = state.reservoirs[i] * decay + input;
        }
        next.cumulative_emissions = state.cumulative_emissions + e_co2;
        next.cumulative_uptake = next.cumulative_emissions - next.reservoir_total();
        next.cumulative_land_use = state.cumulative_land_use + e_land;

        for (k, (col, _)) in self.layout.conc.iter().enumerate() {
            let de = emissions[*col] - prep.reference[*col];
            next.gas_excess[k] = state.gas_excess[k] * prep.gas_decay[k] + prep.gas_gain[k] * de;
        }

        let end_forcing = self.concentration_forcing(&next, params)?;

        let mut pe = PrecursorEmissions::default();
        for &(col, p) in &self.layout.precursors {
            pe.set(p, emissions[col]);
        }
        let (aerosol, ozone, bc_snow) = if self.layout.precursors.is_empty() {
            (0.0, 0.0, 0.0)
        } else {
            let d_ch4 = self
                .layout
                .ch4_col
                .map(|c| emissions[c] - prep.reference[c])
                .unwrap_or(0.0);
            (
                aerosol_forcing(&pe, &prep.ref_precursors),
                ozone_forcing(d_ch4, &pe, &prep.ref_precursors),
                BC_SNOW_PER_MT * (pe.bc - prep.ref_precursors.bc),
            )
        };
        let p = &params.0;
        use super::params::idx;
        let assemble = |conc: [f64; 4], land_use: f64| {
            let [f_co2, f_ch4, f_n2o, f_halo] = conc;
            let other_raw = f_halo + STRAT_H2O_FRACTION * f_ch4 + bc_snow + LANDUSE_PER_GTC * land_use;
            Forcing {
                co2: f_co2,
                ch4: p[idx::SCALE_CH4] * f_ch4,
                n2o: p[idx::SCALE_N2O] * f_n2o,
                aerosol: p[idx::SCALE_AEROSOL] * aerosol,
                ozone: p[idx::SCALE_OZONE] * ozone,
                other: p[idx::SCALE_OTHER] * other_raw,
                exogenous: exo,
            }
        };
        let forcing = match cfg.timing {
            Timing::Uniform => assemble(
                std::array::from_fn(|i| 0.5 * (start_forcing[i] + end_forcing[i])),
                0.5 * (state.cumulative_land_use + next.cumulative_land_use),
            ),
            Timing::EndOfYear => assemble(end_forcing, next.cumulative_land_use),
        };
        let f = forcing.total();
        for j in 0..2 {
            let d = prep.thermal_decay[j];
            next.thermal[j] = state.thermal[j] * d + prep.q[j] * f * (1.0 - d);
        }
        let temperature = next.temperature();
        if !temperature.is_finite() {
            return Err(Error::Domain(format!("non-finite temperature in {}", next.year)));
        }
        let out = StepOutput {
            temperature,
            co2_ppm: cfg.c0 + next.reservoir_total() / cfg.gtc_per_ppm,
            forcing,
            alpha,
            alpha_clamped: clamped,
        };
        Ok((next, out, end_forcing))
    }

    /// Advances `state` by one year under `emissions` (one value per schema gas)
    /// and exogenous forcing `exo`.
    pub fn step(
        &self,
        state: &ClimateState,
        emissions: &[f64],
        exo: f64,
        params: &ParameterVector,
    ) -> Result<(ClimateState, StepOutput)> {
        if emissions.len() != self.schema.len() {
            return Err(Error::Schema(format!(
                "step needs {} emission values, got {}",
                self.schema.len(),
                emissions.len()
            )));
        }
        let reference = self
            .config
            .reference_emissions
            .clone()
            .unwrap_or_else(|| vec![0.0; self.schema.len()]);
        let prep = self.prepare(params, &reference)?;
        let start = self.concentration_forcing(state, params)?;
        let (s, o, _) = self.step_prepared(state, emissions, exo, params, &prep, &start)?;
        Ok((s, o))
    }

    /// Integrates the pathway year by year from `initial`, which must be the
    /// state at the end of the year before the pathway starts.
    pub fn run(
        &self,
        pathway: &EmissionPathway,
        params: &ParameterVector,
        exo: &[f64],
        initial: &ClimateState,
    ) -> Result<TemperaturePathway> {
        if pathway.schema() != &self.schema {
            return Err(Error::Schema(
                "pathway schema differs from the model schema".into(),
            ));
        }
        if exo.len() != pathway.len() {
            return Err(Error::Format(format!(
                "exogenous forcing has {} values for {} years",
                exo.len(),
                pathway.len()
            )));
        }
        if initial.year + 1 != pathway.first_year() {
            return Err(Error::Data(format!(
                "initial state ends in {} but the pathway starts in {}",
                initial.year,
                pathway.first_year()
            )));
        }
        let reference = match &self.config.reference_emissions {
            Some(r) => r.clone(),
            None => pathway.row(0).to_vec(),
        };
        let prep = self.prepare(params, &reference)?;
        let n = pathway.len();
        let mut out = TemperaturePathway {
            years: pathway.years().to_vec(),
            temperature: Vec::with_capacity(n),
            co2_ppm: Vec::with_capacity(n),
            forcing: ForcingSeries::with_capacity(n),
            alpha: Vec::with_capacity(n),
            alpha_clamped: 0,
            final_state: *initial,
        };
        let mut state = *initial;
        let mut start = self.concentration_forcing(&state, params)?;
        for (i, row) in pathway.rows().enumerate() {
            let (s, o, end) = self.step_prepared(&state, row, exo[i], params, &prep, &start)?;
            out.temperature.push(o.temperature);
            out.co2_ppm.push(o.co2_ppm);
            out.forcing.push(&o.forcing);
            out.alpha.push(o.alpha);
            out.alpha_clamped += o.alpha_clamped as usize;
            state = s;
            start = end;
        }
        out.final_state = state;
        Ok(out)
    }

    /// Runs a whole scenario from an unperturbed state.
    pub fn run_scenario(&self, scenario: &Scenario, params: &ParameterVector) -> Result<TemperaturePathway> {
        let init = ClimateState::zero(scenario.pathway.first_year() - 1);
        self.run(&scenario.pathway, params, &scenario.exogenous_forcing, &init)
    }
}

/// Temperature response of the two thermal boxes to a prescribed forcing series.
pub fn thermal_response(forcing: &[f64], params: &ParameterVector) -> Vec<f64> {
    let q = params.q();
    let d = params.d();
    let decay = [(-1.0 / d[0]).exp(), (-1.0 / d[1]).exp()];
    let mut t = [0.0; 2];
    forcing
        .iter()
        .map(|&f| {
            for j in 0..2 {
                t[j] = t[j] * decay[j] + q[j] * f * (1.0 - decay[j]);
            }
            t[0] + t[1]
        })
        .collect()
}

/// Free-function form of [`FairModel::run`].
pub fn run(
    pathway: &EmissionPathway,
    params: &ParameterVector,
    exo: &[f64],
    initial: &ClimateState,
    config: &FairConfig,
) -> Result<TemperaturePathway> {
    FairModel::new(config.clone(), pathway.schema().clone())?.run(pathway, params, exo, initial)
}
