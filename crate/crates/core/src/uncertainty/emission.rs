use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gases::GasKind;
use crate::scenario::{EmissionPathway, DEFAULT_CO2_FLOOR};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmissionFamily {
    Normal,
    Lognormal,
}

/// Distribution of the percentage error of base-year emissions.
///
/// `normal`: `p ~ N(mu, sigma)`.
///
/// `lognormal`: `p = exp(N(ln mu, s))`, i.e. median `mu` (> 0) with `s` chosen
/// so that the standard deviation of `p` equals `sigma`:
/// `exp(s^2) (exp(s^2) - 1) = (sigma / mu)^2`. Every draw is positive and the
/// distribution is right-skewed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmissionUncertaintySpec {
    pub family: EmissionFamily,
    /// Percent.
    pub mu: f64,
    /// Percent.
    pub sigma: f64,
    /// Root seed of the emission streams; `None` reuses the propagation seed.
    #[serde(default)]
    pub seed: Option<u64>,
}

impl EmissionUncertaintySpec {
    pub fn normal(mu: f64, sigma: f64) -> Self {
        EmissionUncertaintySpec {
            family: EmissionFamily::Normal,
            mu,
            sigma,
            seed: None,
        }
    }

    pub fn lognormal(mu: f64, sigma: f64) -> Self {
        EmissionUncertaintySpec {
            family: EmissionFamily::Lognormal,
            mu,
            sigma,
            seed: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() || !self.mu.is_finite() {
            return Err(Error::Config(format!(
                "emission uncertainty needs finite mu and sigma >= 0 (got {}, {})",
                self.mu, self.sigma
            )));
        }
        if self.family == EmissionFamily::Lognormal && self.mu <= 0.0 {
            return Err(Error::Config(
                "lognormal emission uncertainty needs a positive median".into(),
            ));
        }
        Ok(())
    }

    /// Log-scale spread of the lognormal family.
    pub fn log_sigma(&self) -> f64 {
        let r2 = (self.sigma / self.mu).powi(2);
        let u = 0.5 * (1.0 + (1.0 + 4.0 * r2).sqrt());
        u.ln().sqrt()
    }

    /// One percentage deviation.
    pub fn sample_percent<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        match self.family {
            EmissionFamily::Normal => self.mu + self.sigma * z,
            EmissionFamily::Lognormal => (self.mu.ln() + self.log_sigma() * z).exp(),
        }
    }
}

/// Offset `(p / 100) * base_year_value` for one percentage draw `p`.
pub fn sample_offset<R: Rng + ?Sized>(
    spec: &EmissionUncertaintySpec,
    base_year_value: f64,
    rng: &mut R,
) -> Result<f64> {
    spec.validate()?;
    if !base_year_value.is_finite() {
        return Err(Error::Data("base-year emissions must be finite".into()));
    }
    Ok(spec.sample_percent(rng) / 100.0 * base_year_value)
}

/// A perturbed pathway and the number of cells that hit a floor.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbed {
    pub pathway: EmissionPathway,
    pub clamped: usize,
}

/// Adds `offset` (GtC/yr) to the CO2 series in every year from `from_year` on.
///
/// With two carbon columns the offset goes to the first (fossil) one. Values
/// below `floor` are raised to it and counted.
pub fn perturb_pathway_from(pathway: &EmissionPathway, offset: f64, from_year: i32, floor: f64) -> Perturbed {
    let mut out = pathway.clone();
    let col = pathway.schema().carbon_columns()[0];
    let start = pathway
        .index_of_year(from_year.max(pathway.first_year()))
        .unwrap_or(pathway.len());
    let mut clamped = 0;
    for i in start..out.len() {
        let row = out.row_mut(i);
        row[col] += offset;
        if row[col] < floor {
            row[col] = floor;
            clamped += 1;
        }
    }
    Perturbed {
        pathway: out,
        clamped,
    }
}

/// Shifts the CO2 series by `offset` in every year, with the default floor.
pub fn perturb_pathway(pathway: &EmissionPathway, offset: f64) -> Perturbed {
    perturb_pathway_from(pathway, offset, pathway.first_year(), DEFAULT_CO2_FLOOR)
}

/// Shifts every gas by `percent` of its own `base_year` value, from `base_year` on.
///
/// CO2 is floored at `co2_floor`; other species at zero.
pub fn perturb_percent(
    pathway: &EmissionPathway,
    percent: f64,
    base_year: i32,
    co2_floor: f64,
) -> Result<Perturbed> {
    let b = pathway
        .index_of_year(base_year)
        .ok_or_else(|| Error::Data(format!("base year {base_year} not in pathway")))?;
    let base: Vec<f64> = pathway.row(b).to_vec();
    let floors: Vec<f64> = pathway
        .schema()
        .gases()
        .iter()
        .map(|g| match g.kind {
            GasKind::Carbon { .. } => co2_floor,
            _ => 0.0,
        })
        .collect();
    let mut out = pathway.clone();
    let mut clamped = 0;
    for i in b..out.len() {
        let row = out.row_mut(i);
        for g in 0..row.len() {
            row[g] += percent / 100.0 * base[g];
            if row[g] < floors[g] {
                row[g] = floors[g];
                clamped += 1;
            }
        }
    }
    Ok(Perturbed {
        pathway: out,
        clamped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gases::GasSchema;
    use rand::SeedableRng;

    fn flat(n: usize, v: f64) -> EmissionPathway {
        EmissionPathway::new(GasSchema::co2e(), (2020..2020 + n as i32).collect(), vec![v; n]).unwrap()
    }

    #[test]
    fn zero_sigma_normal_zero_mu_gives_zero() {
        let spec = EmissionUncertaintySpec::normal(0.0, 0.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            assert_eq!(sample_offset(&spec, 40.0, &mut rng).unwrap(), 0.0);
        }
    }

    #[test]
    fn negative_sigma_is_config_error() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let spec = EmissionUncertaintySpec::normal(0.0, -1.0);
        assert!(matches!(
            sample_offset(&spec, 1.0, &mut rng),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn lognormal_sd_matches_sigma() {
        let spec = EmissionUncertaintySpec::lognormal(1.0, 13.0);
        let s = spec.log_sigma();
        let var = (s * s).exp() * ((s * s).exp() - 1.0);
        assert!((var.sqrt() - 13.0).abs() < 1e-9);
    }

    #[test]
    fn offset_of_one_adds_n() {
        let p = flat(80, 10.0);
        let q = perturb_pathway(&p, 1.0);
        let sum = |p: &EmissionPathway| p.co2_series().iter().sum::<f64>();
        assert!((sum(&q.pathway) - sum(&p) - 80.0).abs() < 1e-9);
        assert_eq!(perturb_pathway(&p, 0.0).pathway, p);
    }

    #[test]
    fn floor_clamps_and_counts() {
        let q = perturb_pathway(&flat(5, -90.0), -20.0);
        assert_eq!(q.clamped, 5);
        assert!(q.pathway.co2_series().iter().all(|&v| v == DEFAULT_CO2_FLOOR));
    }

    #[test]
    fn percent_shift_starts_at_base_year() {
        let p = flat(10, 10.0);
        let q = perturb_percent(&p, 10.0, 2025, DEFAULT_CO2_FLOOR).unwrap();
        assert_eq!(q.pathway.value(4, 0), 10.0);
        assert!((q.pathway.value(5, 0) - 11.0).abs() < 1e-12);
        assert!(perturb_percent(&p, 10.0, 1990, DEFAULT_CO2_FLOOR).is_err());
    }
}
