//! Locating the bundled data directory.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::scenario::{load_observations, ObservationSeries, ScenarioStore, SectorShares};

/// Environment variable overriding the data-bundle location.
pub const DATA_ENV: &str = "TEMPALIGN_DATA";

/// The five scenario ids shipped with the bundle.
pub const BUNDLED_SCENARIOS: [&str; 5] = [
    "SSP1-RCP1.9",
    "SSP1-RCP2.6",
    "SSP2-RCP4.5",
    "SSP3-RCP7.0",
    "SSP5-RCP8.5",
];

#[derive(Debug, Clone)]
pub struct DataBundle {
    root: PathBuf,
}

impl DataBundle {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        DataBundle { root: root.into() }
    }

    /// `$TEMPALIGN_DATA` if set, otherwise the `data/` directory of this repository.
    pub fn locate() -> Result<Self> {
        if let Ok(p) = std::env::var(DATA_ENV) {
            return Self::checked(PathBuf::from(p));
        }
        let repo = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data");
        Self::checked(repo)
    }

    fn checked(root: PathBuf) -> Result<Self> {
        if root.join("scenarios").is_dir() {
            Ok(DataBundle { root })
        } else {
            Err(Error::Config(format!(
                "no data bundle at {} (set {DATA_ENV})",
                root.display()
            )))
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn scenario_dir(&self) -> PathBuf {
        self.root.join("scenarios")
    }

    pub fn scenario_path(&self, id: &str) -> PathBuf {
        self.scenario_dir().join(format!("{id}.csv"))
    }

    pub fn observations_path(&self) -> PathBuf {
        self.root.join("observations/historical.csv")
    }

    pub fn sectors_path(&self) -> PathBuf {
        self.root.join("sectors/iea_2020.json")
    }

    pub fn portfolio_path(&self, name: &str) -> PathBuf {
        self.root.join("portfolios").join(format!("{name}.json"))
    }

    pub fn scenarios(&self) -> Result<ScenarioStore> {
        ScenarioStore::load_dir(self.scenario_dir())
    }

    pub fn observations(&self) -> Result<ObservationSeries> {
        load_observations(self.observations_path())
    }

    pub fn sector_shares(&self) -> Result<SectorShares> {
        SectorShares::load(self.sectors_path())
    }
}
