use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Annual historical observations used as calibration targets.
///
/// Missing years are empty cells in the source file; they are skipped by the
/// likelihood rather than treated as data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationSeries {
    pub years: Vec<i32>,
    /// Global-mean temperature anomaly, K, relative to `reference_period`.
    pub temperature: Vec<Option<f64>>,
    /// Atmospheric CO2, ppm.
    pub co2_ppm: Vec<Option<f64>>,
    /// Inclusive year range the anomalies are expressed against; `None` means preindustrial.
    pub reference_period: Option<(i32, i32)>,
    pub temperature_noise_sd: f64,
    pub co2_noise_sd: f64,
}

#[derive(Debug, Default, Deserialize)]
struct ObservationMeta {
    temperature_reference_period: Option<(i32, i32)>,
    temperature_noise_sd: Option<f64>,
    co2_noise_sd: Option<f64>,
}

pub const DEFAULT_TEMPERATURE_SD: f64 = 0.1;
pub const DEFAULT_CO2_SD: f64 = 1.0;

impl ObservationSeries {
    pub fn validate(&self) -> Result<()> {
        let n = self.years.len();
        if n == 0 {
            return Err(Error::Format("observation series is empty".into()));
        }
        if self.temperature.len() != n || self.co2_ppm.len() != n {
            return Err(Error::Format("observation columns differ in length".into()));
        }
        for w in self.years.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::Format(format!(
                    "observation years not increasing at {}",
                    w[1]
                )));
            }
        }
        let finite = |v: &Option<f64>| v.is_none_or(|x| x.is_finite());
        if !self.temperature.iter().all(finite) || !self.co2_ppm.iter().all(finite) {
            return Err(Error::Data("non-finite observation inside coverage".into()));
        }
        for (name, sd) in [
            ("temperature", self.temperature_noise_sd),
            ("co2", self.co2_noise_sd),
        ] {
            if !(sd > 0.0 && sd.is_finite()) {
                return Err(Error::Config(format!(
                    "{name} noise SD must be positive, got {sd}"
                )));
            }
        }
        if let Some((a, b)) = self.reference_period {
            if b < a {
                return Err(Error::Config(format!("reference period {a}-{b} is empty")));
            }
        }
        Ok(())
    }

    pub fn first_year(&self) -> i32 {
        self.years[0]
    }

    pub fn last_year(&self) -> i32 {
        *self.years.last().unwrap()
    }

    pub fn n_temperature(&self) -> usize {
        self.temperature.iter().flatten().count()
    }

    pub fn n_co2(&self) -> usize {
        self.co2_ppm.iter().flatten().count()
    }
}

/// Loads `year,temperature,co2_ppm` plus an optional `.meta.json` sidecar
/// giving the reference period and noise SDs.
pub fn load_observations(path: impl AsRef<Path>) -> Result<ObservationSeries> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if text.trim().is_empty() {
        return Err(Error::Format("empty observation file".into()));
    }
    let meta_path = path.with_extension("meta.json");
    let meta: ObservationMeta = if meta_path.exists() {
        let raw = std::fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
        serde_json::from_str(&raw)?
    } else {
        ObservationMeta::default()
    };

    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = rdr.headers()?.clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("observation file lacks column '{name}'")))
    };
    let (cy, ct, cc) = (col("year")?, col("temperature")?, col("co2_ppm")?);
    let cell = |s: &str, year: i32| -> Result<Option<f64>> {
        if s.is_empty() {
            return Ok(None);
        }
        let v: f64 = s
            .parse()
            .map_err(|_| Error::Data(format!("bad observation '{s}' in {year}")))?;
        if v.is_finite() {
            Ok(Some(v))
        } else {
            Err(Error::Data(format!("non-finite observation in {year}")))
        }
    };

    let mut obs = ObservationSeries {
        years: Vec::new(),
        temperature: Vec::new(),
        co2_ppm: Vec::new(),
        reference_period: meta.temperature_reference_period,
        temperature_noise_sd: meta.temperature_noise_sd.unwrap_or(DEFAULT_TEMPERATURE_SD),
        co2_noise_sd: meta.co2_noise_sd.unwrap_or(DEFAULT_CO2_SD),
    };
    for rec in rdr.records() {
        let rec = rec?;
        let year: i32 = rec[cy]
            .parse()
            .map_err(|_| Error::Format(format!("bad year '{}'", &rec[cy])))?;
        obs.years.push(year);
        obs.temperature.push(cell(&rec[ct], year)?);
        obs.co2_ppm.push(cell(&rec[cc], year)?);
    }
    obs.validate()?;
    Ok(obs)
}
