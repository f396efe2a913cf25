use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reporting currencies with fixed USD conversion rates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Currency {
    Usd,
    Eur,
    Sek,
}

impl Currency {
    /// USD per unit.
    pub fn usd_rate(self) -> f64 {
        match self {
            Currency::Usd => 1.0,
            Currency::Eur => 1.0516,
            Currency::Sek => 0.0988,
        }
    }
}

/// Selected emission scopes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ScopeMask(u8);

impl ScopeMask {
    pub const ALL: ScopeMask = ScopeMask(0b111);
    pub const DIRECT: ScopeMask = ScopeMask(0b011);

    pub fn new(scopes: &[u8]) -> Result<Self> {
        let mut bits = 0;
        for &s in scopes {
            if !(1..=3).contains(&s) {
                return Err(Error::Config(format!("scope {s} is not one of 1, 2, 3")));
            }
            bits |= 1 << (s - 1);
        }
        if bits == 0 {
            return Err(Error::Config("scope mask is empty".into()));
        }
        Ok(ScopeMask(bits))
    }

    pub fn contains(self, scope: u8) -> bool {
        (1..=3).contains(&scope) && self.0 & (1 << (scope - 1)) != 0
    }

    pub fn scopes(self) -> Vec<u8> {
        (1..=3).filter(|&s| self.contains(s)).collect()
    }
}

impl Default for ScopeMask {
    fn default() -> Self {
        ScopeMask::ALL
    }
}

impl Serialize for ScopeMask {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.scopes().serialize(s)
    }
}

impl<'de> Deserialize<'de> for ScopeMask {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<u8>::deserialize(d)?;
        ScopeMask::new(&v).map_err(serde::de::Error::custom)
    }
}

/// One company: annual emissions per scope and gross value added.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constituent {
    pub name: String,
    pub sector: String,
    /// ktCO2e/yr.
    pub scope1_kt: f64,
    pub scope2_kt: f64,
    pub scope3_kt: f64,
    /// Million USD/yr.
    pub gva_musd: f64,
    /// Calendar year the figures refer to; defaults to the portfolio base year.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reporting_year: Option<i32>,
}

impl Constituent {
    pub fn new(name: &str, sector: &str, scopes_kt: [f64; 3], gva_musd: f64) -> Self {
        Constituent {
            name: name.into(),
            sector: sector.into(),
            scope1_kt: scopes_kt[0],
            scope2_kt: scopes_kt[1],
            scope3_kt: scopes_kt[2],
            gva_musd,
            reporting_year: None,
        }
    }

    pub fn scopes_kt(&self) -> [f64; 3] {
        [self.scope1_kt, self.scope2_kt, self.scope3_kt]
    }

    /// Emissions of the selected scopes in tCO2e.
    pub fn emissions_t(&self, mask: ScopeMask) -> f64 {
        let kt: f64 = (1..=3u8)
            .zip(self.scopes_kt())
            .filter(|(s, _)| mask.contains(*s))
            .map(|(_, v)| v)
            .sum();
        kt * 1000.0
    }

    pub fn total_kt(&self) -> f64 {
        self.scope1_kt + self.scope2_kt + self.scope3_kt
    }

    /// Same company with every scope scaled so the total becomes `total_kt` (GVA kept).
    pub fn with_total_emissions(&self, total_kt: f64) -> Result<Self> {
        let cur = self.total_kt();
        if cur <= 0.0 || !(total_kt >= 0.0) {
            return Err(Error::Domain(format!(
                "cannot rescale '{}' from {cur} kt to {total_kt} kt",
                self.name
            )));
        }
        let k = total_kt / cur;
        Ok(Constituent {
            scope1_kt: self.scope1_kt * k,
            scope2_kt: self.scope2_kt * k,
            scope3_kt: self.scope3_kt * k,
            ..self.clone()
        })
    }

    pub fn validate(&self) -> Result<()> {
        let field = |f: &str| format!("constituent '{}': {f}", self.name);
        if self.sector.trim().is_empty() {
            return Err(Error::Data(field("sector is empty")));
        }
        for (i, v) in self.scopes_kt().into_iter().enumerate() {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Data(field(&format!(
                    "scope{}_kt must be finite and >= 0, got {v}",
                    i + 1
                ))));
            }
        }
        if !(self.gva_musd > 0.0) || !self.gva_musd.is_finite() {
            return Err(Error::Data(field(&format!(
                "gva_musd must be positive, got {}",
                self.gva_musd
            ))));
        }
        Ok(())
    }
}

/// Figures for one fiscal year, in the reporting currency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiscalReport {
    /// Year and month (1-12) in which the fiscal year ends.
    pub end_year: i32,
    pub end_month: u8,
    pub scope1_kt: f64,
    pub scope2_kt: f64,
    pub scope3_kt: f64,
    /// Million units of `currency`.
    pub gva_m: f64,
    pub currency: Currency,
}

impl FiscalReport {
    fn values_usd(&self) -> [f64; 4] {
        [
            self.scope1_kt,
            self.scope2_kt,
            self.scope3_kt,
            self.gva_m * self.currency.usd_rate(),
        ]
    }
}

/// Calendar-year figures from fiscal reports, weighting each report by the
/// number of its months that fall into `year`.
///
/// A fiscal year ending in month `m` of `year` covers `m` months of it; the
/// following report covers the remaining `12 - m`. Reports ending in December
/// are used as they are.
pub fn prorate_fiscal(name: &str, sector: &str, reports: &[FiscalReport], year: i32) -> Result<Constituent> {
    let mut acc = [0.0; 4];
    let mut months = 0u32;
    for r in reports {
        if !(1..=12).contains(&r.end_month) {
            return Err(Error::Data(format!(
                "'{name}': fiscal end month {} out of range",
                r.end_month
            )));
        }
        let m = r.end_month as i32;
        let w = if r.end_year == year {
            m
        } else if r.end_year == year + 1 {
            12 - m
        } else {
            0
        };
        if w > 0 {
            for (a, v) in acc.iter_mut().zip(r.values_usd()) {
                *a += w as f64 / 12.0 * v;
            }
            months += w as u32;
        }
    }
    if months != 12 {
        return Err(Error::Data(format!(
            "'{name}': fiscal reports cover {months} of 12 months of {year}"
        )));
    }
    let mut c = Constituent::new(name, sector, [acc[0], acc[1], acc[2]], acc[3]);
    c.reporting_year = Some(year);
    c.validate()?;
    Ok(c)
}

/// Companies held, all reporting for `base_year`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Portfolio {
    pub base_year: i32,
    pub constituents: Vec<Constituent>,
}

impl Portfolio {
    pub fn new(base_year: i32, constituents: Vec<Constituent>) -> Result<Self> {
        let p = Portfolio {
            base_year,
            constituents,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: Portfolio = serde_json::from_str(text)?;
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// All field-level problems, empty when valid.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.constituents.is_empty() {
            out.push("portfolio has no constituents".to_string());
        }
        for (i, c) in self.constituents.iter().enumerate() {
            if let Err(e) = c.validate() {
                out.push(format!("constituents[{i}]: {e}"));
            }
            if let Some(y) = c.reporting_year {
                if y != self.base_year {
                    out.push(format!(
                        "constituents[{i}]: reporting year {y} differs from base year {}",
                        self.base_year
                    ));
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::Data(p.join("; ")))
        }
    }

    /// Constituents grouped by sector.
    pub fn by_sector(&self) -> BTreeMap<&str, Vec<&Constituent>> {
        let mut m: BTreeMap<&str, Vec<&Constituent>> = BTreeMap::new();
        for c in &self.constituents {
            m.entry(c.sector.as_str()).or_default().push(c);
        }
        m
    }

    pub fn sectors(&self) -> Vec<&str> {
        self.by_sector().into_keys().collect()
    }

    pub fn total_kt(&self) -> f64 {
        self.constituents.iter().map(Constituent::total_kt).sum()
    }
}

/// Peer companies per sector used to estimate the global sector intensity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkEnsemble {
    pub base_year: i32,
    pub constituents: Vec<Constituent>,
}

impl BenchmarkEnsemble {
    pub fn new(base_year: i32, constituents: Vec<Constituent>) -> Result<Self> {
        let b = BenchmarkEnsemble {
            base_year,
            constituents,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let b: BenchmarkEnsemble = serde_json::from_str(text)?;
        b.validate()?;
        Ok(b)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.constituents.is_empty() {
            return Err(Error::Data("benchmark ensemble is empty".into()));
        }
        for c in &self.constituents {
            c.validate()?;
        }
        Ok(())
    }

    pub fn sector(&self, sector: &str) -> Vec<&Constituent> {
        self.constituents.iter().filter(|c| c.sector == sector).collect()
    }
}

impl From<Portfolio> for BenchmarkEnsemble {
    fn from(p: Portfolio) -> Self {
        BenchmarkEnsemble {
            base_year: p.base_year,
            constituents: p.constituents,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scope_mask_roundtrip_and_errors() {
        let m: ScopeMask = serde_json::from_str("[1, 2]").unwrap();
        assert_eq!(m, ScopeMask::DIRECT);
        assert_eq!(serde_json::to_string(&ScopeMask::ALL).unwrap(), "[1,2,3]");
        assert!(serde_json::from_str::<ScopeMask>("[4]").is_err());
        assert!(ScopeMask::new(&[]).is_err());
    }

    #[test]
    fn june_fiscal_year_blends_half_and_half() {
        let r = |y, s1, gva| FiscalReport {
            end_year: y,
            end_month: 6,
            scope1_kt: s1,
            scope2_kt: 0.0,
            scope3_kt: 0.0,
            gva_m: gva,
            currency: Currency::Sek,
        };
        let c = prorate_fiscal("x", "s", &[r(2022, 100.0, 1000.0), r(2023, 200.0, 3000.0)], 2022).unwrap();
        assert!((c.scope1_kt - 150.0).abs() < 1e-12);
        assert!((c.gva_musd - 2000.0 * 0.0988).abs() < 1e-9);
        assert!(prorate_fiscal("x", "s", &[r(2022, 1.0, 1.0)], 2022).is_err());
    }

    #[test]
    fn invalid_fields_are_all_reported() {
        let mut bad = Constituent::new("a", "s", [-1.0, 0.0, 0.0], 0.0);
        bad.reporting_year = Some(2020);
        let p = Portfolio {
            base_year: 2022,
            constituents: vec![bad],
        };
        let probs = p.problems();
        assert_eq!(probs.len(), 2, "{probs:?}");
        assert!(Portfolio::new(2022, vec![]).is_err());
    }
}
