use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gases::GasSchema;

/// Annual emissions, one row per year and one column per gas of the schema,
/// in canonical units (CO2 as GtC/yr).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmissionPathway {
    schema: GasSchema,
    years: Vec<i32>,
    data: Vec<f64>,
}

impl EmissionPathway {
    /// Builds a pathway from row-major data, checking shape, year spacing and finiteness.
    pub fn new(schema: GasSchema, years: Vec<i32>, data: Vec<f64>) -> Result<Self> {
        if years.is_empty() {
            return Err(Error::Format("pathway has no years".into()));
        }
        for w in years.windows(2) {
            if w[1] != w[0] + 1 {
                return Err(Error::Format(format!(
                    "years must increase in steps of one ({} followed by {})",
                    w[0], w[1]
                )));
            }
        }
        if data.len() != years.len() * schema.len() {
            return Err(Error::Format(format!(
                "expected {} values ({} years x {} gases), got {}",
                years.len() * schema.len(),
                years.len(),
                schema.len(),
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            let n = schema.len();
            return Err(Error::Data(format!(
                "non-finite value for gas '{}' in year {}",
                schema.gases()[i % n].name,
                years[i / n]
            )));
        }
        Ok(EmissionPathway { schema, years, data })
    }

    pub fn zeros(schema: GasSchema, first_year: i32, last_year: i32) -> Self {
        let years: Vec<i32> = (first_year..=last_year).collect();
        let data = vec![0.0; years.len() * schema.len()];
        EmissionPathway { schema, years, data }
    }

    pub fn schema(&self) -> &GasSchema {
        &self.schema
    }

    pub fn years(&self) -> &[i32] {
        &self.years
    }

    pub fn first_year(&self) -> i32 {
        self.years[0]
    }

    pub fn last_year(&self) -> i32 {
        *self.years.last().unwrap()
    }

    pub fn len(&self) -> usize {
        self.years.len()
    }

    pub fn is_empty(&self) -> bool {
        self.years.is_empty()
    }

    pub fn n_gases(&self) -> usize {
        self.schema.len()
    }

    pub fn index_of_year(&self, year: i32) -> Option<usize> {
        let i = year.checked_sub(self.years[0])?;
        (i >= 0 && (i as usize) < self.years.len()).then_some(i as usize)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.n_gases();
        &self.data[i * n..(i + 1) * n]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let n = self.n_gases();
        &mut self.data[i * n..(i + 1) * n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n_gases())
    }

    pub fn value(&self, i: usize, gas: usize) -> f64 {
        self.data[i * self.n_gases() + gas]
    }

    pub fn column(&self, gas: usize) -> Vec<f64> {
        self.rows().map(|r| r[gas]).collect()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Total annual CO2 (all carbon columns), GtC/yr.
    pub fn co2_series(&self) -> Vec<f64> {
        let cols = self.schema.carbon_columns();
        self.rows().map(|r| cols.iter().map(|&c| r[c]).sum()).collect()
    }

    /// Annual totals in Gt CO2-equivalent.
    pub fn co2e_series(&self) -> Vec<f64> {
        self.rows().map(|r| self.schema.co2e_total(r)).collect()
    }

    /// Every value multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= k);
        out
    }

    /// The sub-range `[first, last]` of years.
    pub fn window(&self, first: i32, last: i32) -> Result<Self> {
        let (Some(a), Some(b)) = (self.index_of_year(first), self.index_of_year(last)) else {
            return Err(Error::Data(format!(
                "window {first}-{last} outside pathway {}-{}",
                self.first_year(),
                self.last_year()
            )));
        };
        if b < a {
            return Err(Error::Data(format!("empty window {first}-{last}")));
        }
        let n = self.n_gases();
        Ok(EmissionPathway {
            schema: self.schema.clone(),
            years: self.years[a..=b].to_vec(),
            data: self.data[a * n..(b + 1) * n].to_vec(),
        })
    }
}
