//! Gas catalogue shared by the scenario store and the climate model.
//!
//! Two schemas are supported: a single CO2-equivalent column, and the
//! 39-species emission set of the multigas model (fossil and land-use CO2,
//! CH4, N2O, seven short-lived aerosol and ozone precursors, and 28
//! halogenated gases). Carbon dioxide is carried internally as carbon mass.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Carbon-to-CO2 mass ratio applied at ingestion.
pub const C_PER_CO2: f64 = 12.0 / 44.0;

const MW_S: f64 = 32.065;
const MW_SO2: f64 = 64.066;
const MW_N: f64 = 14.0067;
const MW_NO2: f64 = 46.006;

/// Absolute global warming potential of CO2 over 100 years, W m-2 yr kg-1.
const AGWP100_CO2: f64 = 9.17e-14;
/// Kilograms of a gas in one ppb of the atmosphere, per unit molecular weight.
const KG_PER_PPB_PER_MW: f64 = 1.7726e8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GasKind {
    /// Carbon dioxide entering the four-reservoir carbon cycle.
    Carbon { land_use: bool },
    /// Well-mixed gas with a single-lifetime concentration model.
    Concentration(ConcentrationGas),
    /// Short-lived precursor whose forcing depends on the emission rate only.
    ShortLived(Precursor),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Precursor {
    Sox,
    Co,
    Nmvoc,
    Nox,
    Bc,
    Oc,
    Nh3,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConcentrationGas {
    pub species: Species,
    /// Atmospheric lifetime, years.
    pub lifetime: f64,
    /// Molecular weight, g/mol.
    pub molecular_weight: f64,
    /// Radiative efficiency, W m-2 ppb-1 (unused for CH4 and N2O).
    pub radiative_efficiency: f64,
    /// Concentration change per unit emission: ppb per Mt for CH4/N2O,
    /// ppt per kt for halogenated gases.
    pub conc_per_emission: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Species {
    Methane,
    NitrousOxide,
    Halogen,
}

#[derive(Debug, Clone, Copy)]
pub struct GasInfo {
    pub name: &'static str,
    pub unit: &'static str,
    pub kind: GasKind,
    /// Alternative units accepted at ingestion with their factor to `unit`.
    alternatives: &'static [(&'static str, f64)],
}

const CARBON_UNITS: &[(&str, f64)] = &[
    ("GtCO2/yr", C_PER_CO2),
    ("MtCO2/yr", C_PER_CO2 * 1e-3),
    ("MtC/yr", 1e-3),
];
const CO2E_UNITS: &[(&str, f64)] = &[("GtCO2e/yr", C_PER_CO2), ("MtCO2e/yr", C_PER_CO2 * 1e-3)];
const NONE: &[(&str, f64)] = &[];

const fn conc(species: Species, lifetime: f64, mw: f64, re: f64, per: f64) -> GasKind {
    GasKind::Concentration(ConcentrationGas {
        species,
        lifetime,
        molecular_weight: mw,
        radiative_efficiency: re,
        conc_per_emission: per,
    })
}

// ppb per Mt is 1 / (0.17726 * mw); ppt per kt has the same numeric value.
const fn halogen(name: &'static str, lifetime: f64, re: f64, mw: f64) -> GasInfo {
    GasInfo {
        name,
        unit: "kt/yr",
        kind: conc(Species::Halogen, lifetime, mw, re, 1.0 / (0.17726 * mw)),
        alternatives: NONE,
    }
}

const fn precursor(name: &'static str, unit: &'static str, p: Precursor) -> GasInfo {
    GasInfo {
        name,
        unit,
        kind: GasKind::ShortLived(p),
        alternatives: NONE,
    }
}

/// The 39-species multigas emission set, in canonical column order.
pub const MULTIGAS: [GasInfo; 39] = [
    GasInfo {
        name: "co2_fossil",
        unit: "GtC/yr",
        kind: GasKind::Carbon { land_use: false },
        alternatives: CARBON_UNITS,
    },
    GasInfo {
        name: "co2_land",
        unit: "GtC/yr",
        kind: GasKind::Carbon { land_use: true },
        alternatives: CARBON_UNITS,
    },
    GasInfo {
        name: "ch4",
        unit: "MtCH4/yr",
        kind: conc(Species::Methane, 9.3, 16.04, 0.0, 1.0 / (0.17726 * 16.04)),
        alternatives: NONE,
    },
    GasInfo {
        name: "n2o",
        unit: "MtN2O/yr",
        kind: conc(
            Species::NitrousOxide,
            121.0,
            44.013,
            0.0,
            1.0 / (0.17726 * 44.013),
        ),
        alternatives: &[("ktN2O/yr", 1e-3)],
    },
    GasInfo {
        name: "sox",
        unit: "MtS/yr",
        kind: GasKind::ShortLived(Precursor::Sox),
        alternatives: &[("MtSO2/yr", MW_S / MW_SO2)],
    },
    precursor("co", "MtCO/yr", Precursor::Co),
    precursor("nmvoc", "MtNMVOC/yr", Precursor::Nmvoc),
    GasInfo {
        name: "nox",
        unit: "MtN/yr",
        kind: GasKind::ShortLived(Precursor::Nox),
        alternatives: &[("MtNO2/yr", MW_N / MW_NO2)],
    },
    precursor("bc", "MtBC/yr", Precursor::Bc),
    precursor("oc", "MtOC/yr", Precursor::Oc),
    precursor("nh3", "MtNH3/yr", Precursor::Nh3),
    halogen("cf4", 50000.0, 0.09, 88.0043),
    halogen("c2f6", 10000.0, 0.25, 138.01),
    halogen("c6f14", 3100.0, 0.44, 338.041845),
    halogen("hfc23", 222.0, 0.18, 70.01),
    halogen("hfc32", 5.2, 0.11, 52.02),
    halogen("hfc43_10", 16.1, 0.42, 252.055),
    halogen("hfc125", 28.2, 0.23, 120.02),
    halogen("hfc134a", 13.4, 0.16, 102.03),
    halogen("hfc143a", 47.1, 0.16, 84.04),
    halogen("hfc227ea", 38.9, 0.26, 170.03),
    halogen("hfc245fa", 7.7, 0.24, 134.05),
    halogen("sf6", 3200.0, 0.57, 146.06),
    halogen("cfc11", 45.0, 0.26, 137.37),
    halogen("cfc12", 100.0, 0.32, 120.91),
    halogen("cfc113", 85.0, 0.30, 187.376),
    halogen("cfc114", 190.0, 0.31, 170.92),
    halogen("cfc115", 1020.0, 0.20, 154.466),
    halogen("carb_tet", 26.0, 0.17, 153.81),
    halogen("mcf", 5.0, 0.07, 133.4),
    halogen("hcfc22", 11.9, 0.21, 86.47),
    halogen("hcfc141b", 9.2, 0.16, 116.94),
    halogen("hcfc142b", 17.2, 0.19, 100.49),
    halogen("halon1211", 16.0, 0.29, 165.36),
    halogen("halon1202", 2.9, 0.27, 209.82),
    halogen("halon1301", 65.0, 0.30, 148.91),
    halogen("halon2402", 20.0, 0.31, 259.823),
    halogen("ch3br", 0.8, 0.004, 94.94),
    halogen("ch3cl", 1.0, 0.01, 50.49),
];

pub const CO2E: GasInfo = GasInfo {
    name: "co2e",
    unit: "GtC/yr",
    kind: GasKind::Carbon { land_use: false },
    alternatives: CO2E_UNITS,
};

impl GasInfo {
    /// Factor converting a value in `unit` to this gas's canonical unit.
    pub fn conversion_factor(&self, unit: &str) -> Result<f64> {
        if unit == self.unit {
            return Ok(1.0);
        }
        self.alternatives
            .iter()
            .find(|(u, _)| *u == unit)
            .map(|(_, f)| *f)
            .ok_or_else(|| {
                Error::Schema(format!(
                    "unit '{unit}' not accepted for gas '{}' (expected '{}')",
                    self.name, self.unit
                ))
            })
    }

    /// 100-year global warming potential, used only for CO2-equivalent
    /// aggregation of a multigas emission row. Zero for short-lived species.
    pub fn gwp100(&self) -> f64 {
        match self.kind {
            GasKind::Carbon { .. } => 1.0,
            GasKind::ShortLived(_) => 0.0,
            GasKind::Concentration(g) => match g.species {
                Species::Methane => 28.0,
                Species::NitrousOxide => 265.0,
                Species::Halogen => {
                    let per_kg = g.radiative_efficiency / (KG_PER_PPB_PER_MW * g.molecular_weight);
                    let agwp = per_kg * g.lifetime * (1.0 - (-100.0 / g.lifetime).exp());
                    agwp / AGWP100_CO2
                }
            },
        }
    }

    /// Factor converting this gas's canonical unit to Gt CO2-equivalent.
    pub fn to_gt_co2e(&self) -> f64 {
        match self.kind {
            GasKind::Carbon { .. } => 1.0 / C_PER_CO2,
            GasKind::ShortLived(_) => 0.0,
            GasKind::Concentration(g) => match g.species {
                Species::Methane | Species::NitrousOxide => self.gwp100() * 1e-3,
                Species::Halogen => self.gwp100() * 1e-6,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemaMode {
    /// One CO2-equivalent column; only the carbon cycle is active.
    Co2e,
    /// Full 39-species emission set.
    Multigas,
}

/// Ordered set of emission columns a scenario carries.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GasSchema {
    mode: SchemaMode,
}

impl GasSchema {
    pub fn multigas() -> Self {
        GasSchema {
            mode: SchemaMode::Multigas,
        }
    }

    pub fn co2e() -> Self {
        GasSchema {
            mode: SchemaMode::Co2e,
        }
    }

    /// Resolves a schema from a list of gas names (any order).
    pub fn from_names<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        let mut sorted: Vec<&str> = names.iter().map(|s| s.as_ref()).collect();
        sorted.sort_unstable();
        if sorted == ["co2e"] {
            return Ok(Self::co2e());
        }
        let mut expected: Vec<&str> = MULTIGAS.iter().map(|g| g.name).collect();
        expected.sort_unstable();
        if sorted == expected {
            return Ok(Self::multigas());
        }
        Err(Error::Schema(format!(
            "gas list matches neither the CO2e schema nor the {}-gas schema",
            MULTIGAS.len()
        )))
    }

    pub fn mode(&self) -> SchemaMode {
        self.mode
    }

    pub fn gases(&self) -> &'static [GasInfo] {
        match self.mode {
            SchemaMode::Co2e => std::slice::from_ref(&CO2E),
            SchemaMode::Multigas => &MULTIGAS,
        }
    }

    pub fn len(&self) -> usize {
        self.gases().len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.gases().iter().map(|g| g.name)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.gases().iter().position(|g| g.name == name)
    }

    /// Column indices holding carbon dioxide.
    pub fn carbon_columns(&self) -> Vec<usize> {
        self.gases()
            .iter()
            .enumerate()
            .filter(|(_, g)| matches!(g.kind, GasKind::Carbon { .. }))
            .map(|(i, _)| i)
            .collect()
    }

    /// CO2-equivalent total (Gt CO2e) of one emission row.
    pub fn co2e_total(&self, row: &[f64]) -> f64 {
        self.gases()
            .iter()
            .zip(row)
            .map(|(g, v)| g.to_gt_co2e() * v)
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multigas_has_39_unique_species() {
        let mut names: Vec<_> = MULTIGAS.iter().map(|g| g.name).collect();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), 39);
    }

    #[test]
    fn schema_resolution_ignores_order() {
        let mut names: Vec<_> = MULTIGAS.iter().map(|g| g.name).collect();
        names.reverse();
        assert_eq!(GasSchema::from_names(&names).unwrap(), GasSchema::multigas());
        assert_eq!(GasSchema::from_names(&["co2e"]).unwrap(), GasSchema::co2e());
        assert!(GasSchema::from_names(&["co2e", "ch4"]).is_err());
        assert!(GasSchema::from_names(&names[1..]).is_err());
    }

    #[test]
    fn carbon_unit_conversion_uses_12_over_44() {
        let f = MULTIGAS[0].conversion_factor("GtCO2/yr").unwrap();
        assert_eq!(f, 12.0 / 44.0);
        assert!(MULTIGAS[0].conversion_factor("furlongs").is_err());
    }

    #[test]
    fn sf6_gwp_close_to_published_value() {
        let sf6 = MULTIGAS.iter().find(|g| g.name == "sf6").unwrap();
        let gwp = sf6.gwp100();
        assert!((gwp - 23_500.0).abs() / 23_500.0 < 0.02, "{gwp}");
    }
}
