//! Emission-intensity upscaling of portfolios to global emission pathways.
//!
//! A company's economic emission intensity (EEI) is its emissions per unit of
//! gross value added. For every sector held, the portfolio intensity is
//! compared with a benchmark estimate of the sector's intensity; the sector's
//! share of global emissions is rescaled by that ratio, as if the whole sector
//! operated at the portfolio's intensity. Sectors not held keep their scenario
//! emissions. The adjusted base-year emissions then follow the scenario's
//! growth curve to the end of the pathway.

mod portfolio;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{EmissionPathway, Scenario, SectorShares};
use crate::uncertainty::{
    propagate, CredibleBand, EmissionUncertaintySpec, ParameterSource, PropagationConfig,
};

pub use portfolio::{
    prorate_fiscal, BenchmarkEnsemble, Constituent, Currency, FiscalReport, Portfolio, ScopeMask,
};

/// tCO2e per million USD of GVA.
pub fn company_eei(c: &Constituent, mask: ScopeMask) -> Result<f64> {
    if !(c.gva_musd > 0.0) {
        return Err(Error::Domain(format!(
            "'{}': GVA must be positive, got {}",
            c.name, c.gva_musd
        )));
    }
    Ok(c.emissions_t(mask) / c.gva_musd)
}

/// Emission-weighted mean EEI of the portfolio's constituents in `sector`.
///
/// A sector whose holdings report zero emissions has intensity zero.
pub fn portfolio_sector_eei(p: &Portfolio, sector: &str, mask: ScopeMask) -> Result<f64> {
    let members: Vec<&Constituent> = p.constituents.iter().filter(|c| c.sector == sector).collect();
    if members.is_empty() {
        return Err(Error::NotRepresented(sector.to_string()));
    }
    let total: f64 = members.iter().map(|c| c.emissions_t(mask)).sum();
    if total == 0.0 {
        return Ok(0.0);
    }
    let mut acc = 0.0;
    for c in members {
        acc += c.emissions_t(mask) / total * company_eei(c, mask)?;
    }
    Ok(acc)
}

/// GVA-weighted mean EEI of the benchmark companies in `sector`.
pub fn benchmark_sector_eei(b: &BenchmarkEnsemble, sector: &str, mask: ScopeMask) -> Result<f64> {
    let members = b.sector(sector);
    if members.is_empty() {
        return Err(Error::NotRepresented(format!("{sector} (benchmark)")));
    }
    let gva: f64 = members.iter().map(|c| c.gva_musd).sum();
    if !(gva > 0.0) {
        return Err(Error::Domain(format!("benchmark sector '{sector}' has no GVA")));
    }
    let mut acc = 0.0;
    for c in members {
        acc += c.gva_musd * company_eei(c, mask)?;
    }
    Ok(acc / gva)
}

/// `eei_p / eei_bench`.
pub fn intensity_ratio(eei_p: f64, eei_bench: f64) -> Result<f64> {
    if !(eei_bench > 0.0) || !eei_bench.is_finite() {
        return Err(Error::Domain(format!(
            "benchmark EEI must be positive, got {eei_bench}"
        )));
    }
    if !(eei_p >= 0.0) || !eei_p.is_finite() {
        return Err(Error::Domain(format!(
            "portfolio EEI must be finite and >= 0, got {eei_p}"
        )));
    }
    Ok(eei_p / eei_bench)
}

/// Sector emissions per gas as if the whole sector operated at intensity `eei_p`.
pub fn portfolio_sector_emissions(
    eei_p: f64,
    eei_bench: f64,
    sector_emissions: &BTreeMap<String, f64>,
) -> Result<BTreeMap<String, f64>> {
    let r = intensity_ratio(eei_p, eei_bench)?;
    Ok(sector_emissions.iter().map(|(g, v)| (g.clone(), r * v)).collect())
}

/// How one held sector was rescaled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorAdjustment {
    pub sector: String,
    /// Fraction of global emissions.
    pub share: f64,
    pub portfolio_eei: f64,
    pub benchmark_eei: f64,
    pub ratio: f64,
}

/// Global pathway implied by a portfolio.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalPathway {
    pub pathway: EmissionPathway,
    pub base_year: i32,
    /// Adjusted over original base-year emissions, per gas.
    pub factors: Vec<f64>,
    pub sectors: Vec<SectorAdjustment>,
}

/// Per-sector intensity comparison for every sector the portfolio holds.
pub fn sector_adjustments(
    p: &Portfolio,
    b: &BenchmarkEnsemble,
    shares: &SectorShares,
    mask: ScopeMask,
) -> Result<Vec<SectorAdjustment>> {
    p.validate()?;
    b.validate()?;
    let held = p.sectors();
    for s in &held {
        if shares.get(s).is_none() {
            return Err(Error::Config(format!(
                "sector '{s}' is not in the sector share table"
            )));
        }
        if let Some(a) = shares.ancestors(s).into_iter().find(|a| held.contains(a)) {
            return Err(Error::Config(format!(
                "portfolio holds both '{s}' and its parent sector '{a}'; their emissions would be counted twice"
            )));
        }
    }
    held.into_iter()
        .map(|s| {
            let portfolio_eei = portfolio_sector_eei(p, s, mask)?;
            let benchmark_eei = benchmark_sector_eei(b, s, mask)?;
            Ok(SectorAdjustment {
                sector: s.to_string(),
                share: shares.get(s).map(|x| x.share).unwrap_or(0.0),
                portfolio_eei,
                benchmark_eei,
                ratio: intensity_ratio(portfolio_eei, benchmark_eei)?,
            })
        })
        .collect()
}

/// Global emission pathway for a world whose held sectors operate at the portfolio's intensity.
///
/// For each gas `g`, the base-year amount `E_g` becomes
/// `E_g + sum_s (ratio_s - 1) share_s E_g`; every later year is scaled by the
/// same factor, which keeps the scenario's relative growth curve. Years
/// before the base year are left as they are.
pub fn portfolio_global_pathway(
    p: &Portfolio,
    b: &BenchmarkEnsemble,
    scenario: &Scenario,
    shares: &SectorShares,
    mask: ScopeMask,
) -> Result<GlobalPathway> {
    let sectors = sector_adjustments(p, b, shares, mask)?;
    let path = &scenario.pathway;
    let bi = path.index_of_year(p.base_year).ok_or_else(|| {
        Error::Data(format!(
            "base year {} not in scenario '{}'",
            p.base_year, scenario.id
        ))
    })?;
    let factors: Vec<f64> = path
        .row(bi)
        .iter()
        .map(|&e| {
            if e == 0.0 {
                return 1.0;
            }
            let mut adjusted = e;
            for s in &sectors {
                let sector = s.share * e;
                adjusted += s.ratio * sector - sector;
            }
            adjusted / e
        })
        .collect();
    let mut out = path.clone();
    for i in bi..out.len() {
        for (v, f) in out.row_mut(i).iter_mut().zip(&factors) {
            *v *= f;
        }
    }
    Ok(GlobalPathway {
        pathway: out,
        base_year: p.base_year,
        factors,
        sectors,
    })
}

/// Point summaries of a band in one year.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemperatureSummary {
    pub year: i32,
    pub mean: f64,
    pub median: f64,
    pub lo90: Option<f64>,
    pub hi90: Option<f64>,
}

impl TemperatureSummary {
    pub fn from_band(band: &CredibleBand, year: i32) -> Result<Self> {
        let i = band
            .index_of(year)
            .ok_or_else(|| Error::Data(format!("year {year} not in temperature band")))?;
        let iv = band.interval(0.9, year);
        Ok(TemperatureSummary {
            year,
            mean: band.mean[i],
            median: band.median[i],
            lo90: iv.map(|v| v.0),
            hi90: iv.map(|v| v.1),
        })
    }
}

/// Implied temperature of a portfolio under one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    pub scenario: String,
    pub band: CredibleBand,
    pub summaries: Vec<TemperatureSummary>,
    pub sectors: Vec<SectorAdjustment>,
}

impl Alignment {
    pub fn summary(&self, year: i32) -> Option<&TemperatureSummary> {
        self.summaries.iter().find(|s| s.year == year)
    }
}

pub const SUMMARY_YEARS: [i32; 2] = [2050, 2100];

fn summarize(band: &CredibleBand) -> Result<Vec<TemperatureSummary>> {
    SUMMARY_YEARS
        .iter()
        .filter(|&&y| band.index_of(y).is_some())
        .map(|&y| TemperatureSummary::from_band(band, y))
        .collect()
}

/// Temperature band of the unmodified scenario, with the same summaries as [`implied_temperature`].
pub fn baseline_temperature(
    scenario: &Scenario,
    source: &ParameterSource,
    spec: Option<&EmissionUncertaintySpec>,
    cfg: &PropagationConfig,
) -> Result<Alignment> {
    let band = propagate(scenario, source, spec, cfg)?;
    Ok(Alignment {
        scenario: scenario.id.clone(),
        summaries: summarize(&band)?,
        band,
        sectors: Vec::new(),
    })
}

/// Propagates the portfolio's global pathway through the climate model.
///
/// Reference emissions for non-CO2 gases stay those of the unmodified scenario,
/// so a portfolio identical to the benchmark reproduces the baseline exactly.
#[allow(clippy::too_many_arguments)]
pub fn implied_temperature(
    p: &Portfolio,
    b: &BenchmarkEnsemble,
    scenario: &Scenario,
    shares: &SectorShares,
    mask: ScopeMask,
    source: &ParameterSource,
    spec: Option<&EmissionUncertaintySpec>,
    cfg: &PropagationConfig,
) -> Result<Alignment> {
    let global = portfolio_global_pathway(p, b, scenario, shares, mask)?;
    let mut cfg = cfg.clone();
    if cfg.fair.reference_emissions.is_none() {
        cfg.fair.reference_emissions = Some(scenario.pathway.row(0).to_vec());
    }
    let adjusted = Scenario {
        pathway: global.pathway,
        ..scenario.clone()
    };
    let band = propagate(&adjusted, source, spec, &cfg)?;
    Ok(Alignment {
        scenario: scenario.id.clone(),
        summaries: summarize(&band)?,
        band,
        sectors: global.sectors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gases::GasSchema;

    fn shares() -> SectorShares {
        SectorShares::from_json(
            r#"{"sectors":[
                {"name":"Industry","share":0.3,"parent":null},
                {"name":"Steel","share":0.1,"parent":"Industry"},
                {"name":"Power","share":0.7,"parent":null}]}"#,
        )
        .unwrap()
    }

    fn scenario() -> Scenario {
        let years: Vec<i32> = (2000..=2100).collect();
        let data = years.iter().map(|&y| 10.0 + 0.1 * (y - 2000) as f64).collect();
        Scenario::new(
            "s",
            EmissionPathway::new(GasSchema::co2e(), years, data).unwrap(),
            None,
        )
        .unwrap()
    }

    #[test]
    fn eei_identities() {
        let zero = Constituent::new("z", "Steel", [0.0; 3], 5.0);
        assert_eq!(company_eei(&zero, ScopeMask::ALL).unwrap(), 0.0);
        let unit = Constituent::new("u", "Steel", [0.004, 0.0, 0.0], 4.0);
        assert!((company_eei(&unit, ScopeMask::ALL).unwrap() - 1.0).abs() < 1e-12);
        let mut bad = unit.clone();
        bad.gva_musd = 0.0;
        assert!(matches!(company_eei(&bad, ScopeMask::ALL), Err(Error::Domain(_))));
    }

    #[test]
    fn absent_sector_is_not_represented() {
        let p = Portfolio::new(2022, vec![Constituent::new("a", "Steel", [1.0, 0.0, 0.0], 1.0)]).unwrap();
        assert!(matches!(
            portfolio_sector_eei(&p, "Power", ScopeMask::ALL),
            Err(Error::NotRepresented(_))
        ));
    }

    #[test]
    fn ratio_scales_every_gas() {
        let m: BTreeMap<String, f64> = [("CO2".to_string(), 2.0), ("CH4".to_string(), 4.0)].into();
        let out = portfolio_sector_emissions(1.0, 2.0, &m).unwrap();
        assert_eq!(out["CO2"], 1.0);
        assert_eq!(out["CH4"], 2.0);
        assert!(portfolio_sector_emissions(1.0, 0.0, &m).is_err());
    }

    #[test]
    fn factor_follows_share_and_ratio() {
        let p = Portfolio::new(2022, vec![Constituent::new("a", "Steel", [1.0, 0.0, 0.0], 1.0)]).unwrap();
        let b =
            BenchmarkEnsemble::new(2022, vec![Constituent::new("b", "Steel", [2.0, 0.0, 0.0], 1.0)]).unwrap();
        let s = scenario();
        let g = portfolio_global_pathway(&p, &b, &s, &shares(), ScopeMask::ALL).unwrap();
        // ratio 0.5 on a 10% sector
        assert!((g.factors[0] - 0.95).abs() < 1e-12);
        let i = s.pathway.index_of_year(2021).unwrap();
        assert_eq!(g.pathway.row(i), s.pathway.row(i));
        let j = s.pathway.index_of_year(2080).unwrap();
        assert!((g.pathway.value(j, 0) - 0.95 * s.pathway.value(j, 0)).abs() < 1e-12);
    }

    #[test]
    fn parent_and_child_together_rejected() {
        let p = Portfolio::new(
            2022,
            vec![
                Constituent::new("a", "Steel", [1.0, 0.0, 0.0], 1.0),
                Constituent::new("b", "Industry", [1.0, 0.0, 0.0], 1.0),
            ],
        )
        .unwrap();
        let b: BenchmarkEnsemble = p.clone().into();
        let r = portfolio_global_pathway(&p, &b, &scenario(), &shares(), ScopeMask::ALL);
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn missing_base_year_is_error() {
        let p = Portfolio::new(1990, vec![Constituent::new("a", "Steel", [1.0, 0.0, 0.0], 1.0)]).unwrap();
        let b: BenchmarkEnsemble = p.clone().into();
        assert!(portfolio_global_pathway(&p, &b, &scenario(), &shares(), ScopeMask::ALL).is_err());
    }
}
