//! Scenario store: emission pathways, sector shares and observations.

mod observations;
mod pathway;
mod sectors;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gases::{GasSchema, SchemaMode};

pub use observations::{load_observations, ObservationSeries};
pub use pathway::EmissionPathway;
pub use sectors::{disaggregate_sectors, Sector, SectorShares};

/// Lowest admissible annual CO2 value, GtC/yr. Anything below is treated as corrupt data.
pub const DEFAULT_CO2_FLOOR: f64 = -100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    pub pathway: EmissionPathway,
    /// Solar plus volcanic forcing per pathway year, W/m2.
    pub exogenous_forcing: Vec<f64>,
    #[serde(default)]
    pub source: Option<String>,
}

impl Scenario {
    pub fn new(
        id: impl Into<String>,
        pathway: EmissionPathway,
        exogenous_forcing: Option<Vec<f64>>,
    ) -> Result<Self> {
        let exo = exogenous_forcing.unwrap_or_else(|| vec![0.0; pathway.len()]);
        if exo.len() != pathway.len() {
            return Err(Error::Format(format!(
                "exogenous forcing has {} values for {} years",
                exo.len(),
                pathway.len()
            )));
        }
        if exo.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite exogenous forcing".into()));
        }
        Ok(Scenario {
            id: id.into(),
            pathway,
            exogenous_forcing: exo,
            source: None,
        })
    }

    pub fn years(&self) -> &[i32] {
        self.pathway.years()
    }

    /// Checks the CO2 columns against a floor (GtC/yr).
    pub fn check_floor(&self, floor: f64) -> Result<()> {
        let cols = self.pathway.schema().carbon_columns();
        for (i, row) in self.pathway.rows().enumerate() {
            for &c in &cols {
                if row[c] <= floor {
                    return Err(Error::Data(format!(
                        "CO2 value {} GtC/yr in {} is below the floor {floor}",
                        row[c],
                        self.pathway.years()[i]
                    )));
                }
            }
        }
        Ok(())
    }

    /// Same scenario restricted to `[first, last]`.
    pub fn window(&self, first: i32, last: i32) -> Result<Self> {
        let pathway = self.pathway.window(first, last)?;
        let a = self.pathway.index_of_year(first).unwrap();
        let exo = self.exogenous_forcing[a..a + pathway.len()].to_vec();
        Ok(Scenario {
            id: self.id.clone(),
            pathway,
            exogenous_forcing: exo,
            source: self.source.clone(),
        })
    }

    /// Collapses a multigas scenario to a single CO2-equivalent column (GWP100).
    pub fn to_co2e(&self) -> Self {
        if self.pathway.schema().mode() == SchemaMode::Co2e {
            return self.clone();
        }
        let gtc: Vec<f64> = self
            .pathway
            .co2e_series()
            .into_iter()
            .map(|v| v * crate::gases::C_PER_CO2)
            .collect();
        let pathway = EmissionPathway::new(GasSchema::co2e(), self.pathway.years().to_vec(), gtc)
            .expect("aggregation preserves shape");
        Scenario {
            id: self.id.clone(),
            pathway,
            exogenous_forcing: self.exogenous_forcing.clone(),
            source: self.source.clone(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct ScenarioMeta {
    #[serde(default)]
    id: Option<String>,
    #[serde(default)]
    units: BTreeMap<String, String>,
    #[serde(default)]
    exogenous_forcing: Option<String>,
    #[serde(default)]
    source: Option<String>,
}

fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("meta.json")
}

/// Loads a scenario CSV (`year,<gas>...`) and its optional `.meta.json` sidecar.
///
/// The sidecar declares per-gas units (canonical units are assumed for gases it
/// omits) and an optional exogenous-forcing CSV path relative to the scenario file.
pub fn load_scenario(path: impl AsRef<Path>, schema: &GasSchema) -> Result<Scenario> {
    load_scenario_with_floor(path, schema, DEFAULT_CO2_FLOOR)
}

pub fn load_scenario_with_floor(
    path: impl AsRef<Path>,
    schema: &GasSchema,
    co2_floor: f64,
) -> Result<Scenario> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let meta_path = sidecar_path(path);
    let meta: ScenarioMeta = if meta_path.exists() {
        let raw = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
        serde_json::from_str(&raw)?
    } else {
        ScenarioMeta::default()
    };

    let pathway = parse_pathway(&text, schema, &meta.units)?;
    let exo = match &meta.exogenous_forcing {
        Some(rel) => {
            let fpath = path.parent().unwrap_or(Path::new(".")).join(rel);
            Some(load_forcing(&fpath)?.aligned(pathway.years()))
        }
        None => None,
    };
    let id = meta.id.clone().unwrap_or_else(|| {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    let mut scenario = Scenario::new(id, pathway, exo)?;
    scenario.source = meta.source;
    scenario.check_floor(co2_floor)?;
    Ok(scenario)
}

/// Reads the header of a scenario CSV and resolves its schema.
pub fn detect_schema(path: impl AsRef<Path>) -> Result<GasSchema> {
    let path = path.as_ref();
    let mut rdr = csv::Reader::from_path(path)?;
    let header = rdr.headers()?.clone();
    let names: Vec<&str> = header.iter().skip(1).map(str::trim).collect();
    if header.get(0).map(str::trim) != Some("year") {
        return Err(Error::Format("first column must be 'year'".into()));
    }
    GasSchema::from_names(&names)
}

fn parse_pathway(
    text: &str,
    schema: &GasSchema,
    units: &BTreeMap<String, String>,
) -> Result<EmissionPathway> {
    if text.trim().is_empty() {
        return Err(Error::Format("empty scenario file".into()));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = rdr.headers()?.clone();
    if header.get(0) != Some("year") {
        return Err(Error::Format("first column must be 'year'".into()));
    }
    let mut column_of = vec![usize::MAX; schema.len()];
    for (pos, name) in header.iter().enumerate().skip(1) {
        match schema.index_of(name) {
            Some(g) if column_of[g] == usize::MAX => column_of[g] = pos,
            Some(_) => return Err(Error::Schema(format!("duplicate gas column '{name}'"))),
            None => return Err(Error::Schema(format!("unexpected gas column '{name}'"))),
        }
    }
    if let Some(g) = column_of.iter().position(|&c| c == usize::MAX) {
        return Err(Error::Schema(format!(
            "missing gas column '{}'",
            schema.gases()[g].name
        )));
    }
    let factors = schema
        .gases()
        .iter()
        .map(|g| match units.get(g.name) {
            Some(u) => g.conversion_factor(u),
            None => Ok(1.0),
        })
        .collect::<Result<Vec<_>>>()?;

    let mut years = Vec::new();
    let mut data = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let year: i32 = rec[0]
            .parse()
            .map_err(|_| Error::Format(format!("bad year '{}'", &rec[0])))?;
        for (g, &col) in column_of.iter().enumerate() {
            let cell = &rec[col];
            let v: f64 = cell.parse().map_err(|_| {
                Error::Data(format!(
                    "unparseable value '{cell}' for '{}' in {year}",
                    schema.gases()[g].name
                ))
            })?;
            if !v.is_finite() {
                return Err(Error::Data(format!(
                    "non-finite value for '{}' in {year}",
                    schema.gases()[g].name
                )));
            }
            data.push(v * factors[g]);
        }
        years.push(year);
    }
    if years.is_empty() {
        return Err(Error::Format("scenario file has a header but no rows".into()));
    }
    EmissionPathway::new(schema.clone(), years, data)
}

/// Writes a scenario in canonical units, with a sidecar and (if non-zero) a forcing file.
///
/// Values use the shortest representation that round-trips, so load, write,
/// reload, write produces identical bytes.
pub fn write_scenario(scenario: &Scenario, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let p = &scenario.pathway;
    let mut out = String::from("year");
    for name in p.schema().names() {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (i, row) in p.rows().enumerate() {
        out.push_str(&p.years()[i].to_string());
        for v in row {
            out.push(',');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))?;

    let mut meta = ScenarioMeta {
        id: Some(scenario.id.clone()),
        units: p
            .schema()
            .gases()
            .iter()
            .map(|g| (g.name.to_string(), g.unit.to_string()))
            .collect(),
        exogenous_forcing: None,
        source: scenario.source.clone(),
    };
    if scenario.exogenous_forcing.iter().any(|&f| f != 0.0) {
        let stem = path.file_stem().unwrap_or_default().to_string_lossy();
        let fname = format!("{stem}.forcing.csv");
        let mut f = String::from("year,total\n");
        for (y, v) in p.years().iter().zip(&scenario.exogenous_forcing) {
            f.push_str(&format!("{y},{v}\n"));
        }
        let fpath = path.with_file_name(&fname);
        fs::write(&fpath, f).map_err(|e| Error::io(&fpath, e))?;
        meta.exogenous_forcing = Some(fname);
    }
    let mpath = sidecar_path(path);
    fs::write(&mpath, serde_json::to_string_pretty(&meta)?).map_err(|e| Error::io(&mpath, e))?;
    Ok(())
}

/// Exogenous forcing by year; all non-year columns of the source file are summed.
#[derive(Debug, Clone, PartialEq)]
pub struct ForcingSeries {
    pub years: Vec<i32>,
    pub values: Vec<f64>,
}

impl ForcingSeries {
    /// Values on `years`, zero where the series has no coverage.
    pub fn aligned(&self, years: &[i32]) -> Vec<f64> {
        let first = self.years.first().copied().unwrap_or(0);
        years
            .iter()
            .map(|&y| {
                let i = y - first;
                if i >= 0 && (i as usize) < self.values.len() {
                    self.values[i as usize]
                } else {
                    0.0
                }
            })
            .collect()
    }
}

pub fn load_forcing(path: impl AsRef<Path>) -> Result<ForcingSeries> {
    let path = path.as_ref();
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Format(format!("{other:?}")),
        })?;
    let mut years = Vec::new();
    let mut values = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let year: i32 = rec[0]
            .parse()
            .map_err(|_| Error::Format(format!("bad year '{}' in forcing file", &rec[0])))?;
        let mut total = 0.0;
        for cell in rec.iter().skip(1) {
            let v: f64 = cell
                .parse()
                .map_err(|_| Error::Data(format!("bad forcing value '{cell}' in {year}")))?;
            if !v.is_finite() {
                return Err(Error::Data(format!("non-finite forcing in {year}")));
            }
            total += v;
        }
        if let Some(&last) = years.last() {
            if year != last + 1 {
                return Err(Error::Format(format!("forcing years not consecutive at {year}")));
            }
        }
        years.push(year);
        values.push(total);
    }
    Ok(ForcingSeries { years, values })
}

/// Summary of one stored scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioInfo {
    pub id: String,
    pub schema: SchemaMode,
    pub first_year: i32,
    pub last_year: i32,
    pub n_gases: usize,
    pub source: Option<String>,
}

/// Immutable collection of validated scenarios keyed by id.
#[derive(Debug, Clone, Default)]
pub struct ScenarioStore {
    scenarios: BTreeMap<String, Arc<Scenario>>,
}

impl ScenarioStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Loads every `*.csv` in `dir`, resolving each file's schema from its header.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let mut store = ScenarioStore::new();
        let mut paths: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.extension().is_some_and(|e| e == "csv") && !p.to_string_lossy().ends_with(".forcing.csv")
            })
            .collect();
        paths.sort();
        for p in paths {
            let schema = detect_schema(&p)?;
            store.insert(load_scenario(&p, &schema)?);
        }
        Ok(store)
    }

    pub fn insert(&mut self, scenario: Scenario) {
        self.scenarios.insert(scenario.id.clone(), Arc::new(scenario));
    }

    pub fn get(&self, id: &str) -> Option<Arc<Scenario>> {
        self.scenarios.get(id).cloned()
    }

    pub fn ids(&self) -> Vec<String> {
        self.scenarios.keys().cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    pub fn catalog(&self) -> Vec<ScenarioInfo> {
        self.scenarios
            .values()
            .map(|s| ScenarioInfo {
                id: s.id.clone(),
                schema: s.pathway.schema().mode(),
                first_year: s.pathway.first_year(),
                last_year: s.pathway.last_year(),
                n_gases: s.pathway.n_gases(),
                source: s.source.clone(),
            })
            .collect()
    }
}
