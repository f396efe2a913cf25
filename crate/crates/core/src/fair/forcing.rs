//! Radiative forcing relations, W m-2.

use crate::gases::Precursor;

/// Logarithmic CO2 forcing: `F2x / ln 2 * ln(C / C0)`.
pub fn co2_forcing(c: f64, c0: f64, f2x: f64) -> f64 {
    f2x / std::f64::consts::LN_2 * (c / c0).ln()
}

// CH4/N2O band overlap, concentrations in ppb.
fn overlap(m: f64, n: f64) -> f64 {
    0.47 * (1.0 + 2.01e-5 * (m * n).powf(0.75) + 5.31e-15 * m * (m * n).powf(1.52)).ln()
}

/// Methane forcing with the N2O overlap held at its preindustrial level.
pub fn ch4_forcing(m: f64, m0: f64, n0: f64) -> f64 {
    0.036 * (m.sqrt() - m0.sqrt()) - (overlap(m, n0) - overlap(m0, n0))
}

/// Nitrous-oxide forcing with the CH4 overlap held at its preindustrial level.
pub fn n2o_forcing(n: f64, m0: f64, n0: f64) -> f64 {
    0.12 * (n.sqrt() - n0.sqrt()) - (overlap(m0, n) - overlap(m0, n0))
}

/// Fraction of methane forcing attributed to stratospheric water vapour.
pub const STRAT_H2O_FRACTION: f64 = 0.15;
/// Black carbon on snow, W m-2 per Mt/yr above reference.
pub const BC_SNOW_PER_MT: f64 = 0.04 / 8.09;
/// Land-use albedo, W m-2 per GtC of cumulative land-use CO2.
pub const LANDUSE_PER_GTC: f64 = -0.00113789;

/// Emission anomalies of the seven short-lived precursors, in canonical units.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PrecursorEmissions {
    pub sox: f64,
    pub co: f64,
    pub nmvoc: f64,
    pub nox: f64,
    pub bc: f64,
    pub oc: f64,
    pub nh3: f64,
}

impl PrecursorEmissions {
    pub fn set(&mut self, p: Precursor, v: f64) {
        match p {
            Precursor::Sox => self.sox = v,
            Precursor::Co => self.co = v,
            Precursor::Nmvoc => self.nmvoc = v,
            Precursor::Nox => self.nox = v,
            Precursor::Bc => self.bc = v,
            Precursor::Oc => self.oc = v,
            Precursor::Nh3 => self.nh3 = v,
        }
    }
}

const ARI: [f64; 7] = [
    -6.2227e-3,  // SOx
    0.0,         // CO
    -3.8392e-4,  // NMVOC
    -1.16551e-3, // NOx
    1.601537e-2, // BC
    -1.45339e-3, // OC
    -1.55605e-3, // NH3
];

/// Aerosol forcing (direct plus cloud interaction) for absolute emissions
/// `e` relative to reference emissions `e0`.
pub fn aerosol_forcing(e: &PrecursorEmissions, e0: &PrecursorEmissions) -> f64 {
    let de = [
        e.sox - e0.sox,
        e.co - e0.co,
        e.nmvoc - e0.nmvoc,
        e.nox - e0.nox,
        e.bc - e0.bc,
        e.oc - e0.oc,
        e.nh3 - e0.nh3,
    ];
    let ari: f64 = ARI.iter().zip(de).map(|(b, d)| b * d).sum();
    let aci_term = |x: &PrecursorEmissions| {
        let arg = 1.0 + 0.01107147 * x.sox + 0.01387492 * (x.bc + x.oc);
        arg.max(1e-12).ln()
    };
    let aci = -1.95011431 * 0.3678 * (aci_term(e) - aci_term(e0));
    ari + aci
}

/// Tropospheric ozone from precursor anomalies; `d_ch4` is the CH4 emission anomaly (Mt/yr).
pub fn ozone_forcing(d_ch4: f64, e: &PrecursorEmissions, e0: &PrecursorEmissions) -> f64 {
    2.8249e-4 * d_ch4 + 1.0695e-4 * (e.co - e0.co) - 9.3604e-4 * (e.nmvoc - e0.nmvoc)
        + 99.7831e-4 * (e.nox - e0.nox)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn doubling_gives_f2x() {
        let f = co2_forcing(556.0, 278.0, 3.71);
        assert!((f - 3.71).abs() / 3.71 < 1e-12);
        assert_eq!(co2_forcing(278.0, 278.0, 3.71), 0.0);
    }

    #[test]
    fn ghg_forcings_vanish_at_preindustrial_and_grow() {
        assert_eq!(ch4_forcing(722.0, 722.0, 273.0), 0.0);
        assert_eq!(n2o_forcing(273.0, 722.0, 273.0), 0.0);
        // present-day magnitudes
        let f = ch4_forcing(1866.0, 722.0, 273.0);
        assert!(f > 0.4 && f < 0.6, "{f}");
        let f = n2o_forcing(332.0, 722.0, 273.0);
        assert!(f > 0.15 && f < 0.25, "{f}");
    }

    #[test]
    fn sulphate_cools_bc_warms() {
        let z = PrecursorEmissions::default();
        let mut s = z;
        s.sox = 50.0;
        assert!(aerosol_forcing(&s, &z) < 0.0);
        let mut b = z;
        b.bc = 5.0;
        assert!(
            aerosol_forcing(&b, &z)
                > aerosol_forcing(
                    &{
                        let mut o = z;
                        o.oc = 5.0;
                        o
                    },
                    &z
                )
        );
    }
}
