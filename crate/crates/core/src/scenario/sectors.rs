use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{EmissionPathway, Scenario};

const SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sector {
    pub name: String,
    /// Fraction of global emissions, 0..=1.
    pub share: f64,
    #[serde(default)]
    pub parent: Option<String>,
}

/// Constant-in-time fractions of global emissions per sector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorShares {
    pub sectors: Vec<Sector>,
}

impl SectorShares {
    pub fn from_json(text: &str) -> Result<Self> {
        let s: SectorShares = serde_json::from_str(text)?;
        s.check_structure()?;
        Ok(s)
    }

    /// Loads a share file and normalizes it so the top level sums to one.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)?.normalized()
    }

    pub fn get(&self, name: &str) -> Option<&Sector> {
        self.sectors.iter().find(|s| s.name == name)
    }

    pub fn top_level(&self) -> impl Iterator<Item = &Sector> {
        self.sectors.iter().filter(|s| s.parent.is_none())
    }

    pub fn top_level_sum(&self) -> f64 {
        self.top_level().map(|s| s.share).sum()
    }

    /// Chain of ancestors from the sector's parent up to its root.
    pub fn ancestors(&self, name: &str) -> Vec<&str> {
        let mut out = Vec::new();
        let mut cur = self.get(name).and_then(|s| s.parent.as_deref());
        while let Some(p) = cur {
            out.push(p);
            cur = self.get(p).and_then(|s| s.parent.as_deref());
            if out.len() > self.sectors.len() {
                break;
            }
        }
        out
    }

    fn check_structure(&self) -> Result<()> {
        if self.sectors.is_empty() {
            return Err(Error::Config("no sectors".into()));
        }
        let mut seen = BTreeMap::new();
        for s in &self.sectors {
            if !(s.share.is_finite() && (0.0..=1.0).contains(&s.share)) {
                return Err(Error::Config(format!("share of '{}' must lie in [0, 1]", s.name)));
            }
            if seen.insert(s.name.as_str(), ()).is_some() {
                return Err(Error::Config(format!("duplicate sector '{}'", s.name)));
            }
        }
        for s in &self.sectors {
            if let Some(p) = &s.parent {
                let parent = self
                    .get(p)
                    .ok_or_else(|| Error::Config(format!("sector '{}' has unknown parent '{p}'", s.name)))?;
                if s.share > parent.share * (1.0 + SUM_TOL) {
                    return Err(Error::Config(format!(
                        "subsector '{}' share {} exceeds parent '{p}' share {}",
                        s.name, s.share, parent.share
                    )));
                }
                if self.ancestors(&s.name).len() > self.sectors.len() {
                    return Err(Error::Config(format!("cycle in sector parents at '{}'", s.name)));
                }
            }
        }
        Ok(())
    }

    /// Full validation: structure plus top-level shares summing to one.
    pub fn validate(&self) -> Result<()> {
        self.check_structure()?;
        let sum = self.top_level_sum();
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(Error::Config(format!(
                "top-level sector shares sum to {sum}, not 1"
            )));
        }
        Ok(())
    }

    /// Rescales every share by the inverse top-level sum.
    pub fn normalized(&self) -> Result<Self> {
        self.check_structure()?;
        let sum = self.top_level_sum();
        if sum <= 0.0 {
            return Err(Error::Config("top-level shares sum to zero".into()));
        }
        let mut out = self.clone();
        for s in &mut out.sectors {
            s.share /= sum;
        }
        Ok(out)
    }
}

/// Splits the scenario's global pathway into per-sector pathways (every sector,
/// including subsectors) by constant shares.
pub fn disaggregate_sectors(
    scenario: &Scenario,
    shares: &SectorShares,
) -> Result<BTreeMap<String, EmissionPathway>> {
    shares.validate()?;
    Ok(shares
        .sectors
        .iter()
        .map(|s| (s.name.clone(), scenario.pathway.scaled(s.share)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gases::GasSchema;

    fn scenario(values: &[f64]) -> Scenario {
        let years = (2020..2020 + values.len() as i32).collect();
        let p = EmissionPathway::new(GasSchema::co2e(), years, values.to_vec()).unwrap();
        Scenario::new("t", p, None).unwrap()
    }

    fn shares(v: &[(&str, f64, Option<&str>)]) -> SectorShares {
        SectorShares {
            sectors: v
                .iter()
                .map(|(n, s, p)| Sector {
                    name: n.to_string(),
                    share: *s,
                    parent: p.map(str::to_string),
                })
                .collect(),
        }
    }

    #[test]
    fn electricity_share_of_forty() {
        let sh = shares(&[("Electricity and Heat", 0.4417, None), ("Rest", 0.5583, None)]);
        let out = disaggregate_sectors(&scenario(&[40.0]), &sh).unwrap();
        assert!((out["Electricity and Heat"].value(0, 0) - 17.668).abs() < 1e-12);
    }

    #[test]
    fn single_sector_is_identity() {
        let s = scenario(&[3.0, 4.5, -1.0]);
        let out = disaggregate_sectors(&s, &shares(&[("All", 1.0, None)])).unwrap();
        assert_eq!(out["All"], s.pathway);
    }

    #[test]
    fn quarter_three_quarters() {
        let out = disaggregate_sectors(
            &scenario(&[100.0]),
            &shares(&[("a", 0.25, None), ("b", 0.75, None)]),
        )
        .unwrap();
        assert_eq!(out["a"].value(0, 0), 25.0);
        assert_eq!(out["b"].value(0, 0), 75.0);
        assert_eq!(out["a"].value(0, 0) + out["b"].value(0, 0), 100.0);
    }

    #[test]
    fn unnormalized_shares_are_config_error() {
        let r = disaggregate_sectors(&scenario(&[1.0]), &shares(&[("a", 0.3, None), ("b", 0.3, None)]));
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn subsector_larger_than_parent_rejected() {
        let sh = shares(&[
            ("Industry", 0.2, None),
            ("Steel", 0.3, Some("Industry")),
            ("x", 0.8, None),
        ]);
        assert!(sh.validate().is_err());
    }

    #[test]
    fn normalization_closes_top_level() {
        let sh = shares(&[("a", 0.2, None), ("a1", 0.1, Some("a")), ("b", 0.2, None)])
            .normalized()
            .unwrap();
        sh.validate().unwrap();
        assert!((sh.get("a1").unwrap().share - 0.25).abs() < 1e-15);
    }
}
