use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Linear-interpolation quantile of an ascending slice.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Deterministic,
    ParameterOnly,
    EmissionOnly,
    Combined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandLevel {
    /// Central probability mass, e.g. 0.9.
    pub level: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Per-year quantile envelopes of a temperature ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CredibleBand {
    pub years: Vec<i32>,
    pub median: Vec<f64>,
    pub mean: Vec<f64>,
    /// Ascending by level, so each level's interval contains the previous one.
    pub levels: Vec<BandLevel>,
    pub n_samples: usize,
    pub provenance: Provenance,
    /// Forward runs that failed and were left out.
    #[serde(default)]
    pub failures: usize,
    /// Cells raised to an emission floor across all draws.
    #[serde(default)]
    pub clamped_cells: usize,
}

pub const DEFAULT_LEVELS: [f64; 2] = [0.90, 0.99];

impl CredibleBand {
    /// Reduces an ensemble (`members[k][t]`) to a band.
    pub fn from_ensemble(
        years: Vec<i32>,
        members: &[Vec<f64>],
        levels: &[f64],
        provenance: Provenance,
    ) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::Data("empty ensemble".into()));
        }
        if members.iter().any(|m| m.len() != years.len()) {
            return Err(Error::Data(
                "ensemble members differ in length from the year axis".into(),
            ));
        }
        let mut levels: Vec<f64> = levels.to_vec();
        if levels.iter().any(|l| !(*l > 0.0 && *l < 1.0)) {
            return Err(Error::Config("band levels must lie in (0, 1)".into()));
        }
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        let n = members.len();
        let t = years.len();
        let mut median = Vec::with_capacity(t);
        let mut mean = Vec::with_capacity(t);
        let mut bands: Vec<BandLevel> = levels
            .iter()
            .map(|&level| BandLevel {
                level,
                lower: Vec::with_capacity(t),
                upper: Vec::with_capacity(t),
            })
            .collect();
        let mut col = vec![0.0; n];
        for j in 0..t {
            for (c, m) in col.iter_mut().zip(members) {
                *c = m[j];
            }
            // shifted by the first member: exact when all members agree
            let shift = col[0];
            mean.push(shift + col.iter().map(|c| c - shift).sum::<f64>() / n as f64);
            col.sort_by(f64::total_cmp);
            median.push(quantile_sorted(&col, 0.5));
            for b in &mut bands {
                let tail = (1.0 - b.level) / 2.0;
                b.lower.push(quantile_sorted(&col, tail));
                b.upper.push(quantile_sorted(&col, 1.0 - tail));
            }
        }
        Ok(CredibleBand {
            years,
            median,
            mean,
            levels: bands,
            n_samples: n,
            provenance,
            failures: 0,
            clamped_cells: 0,
        })
    }

    pub fn index_of(&self, year: i32) -> Option<usize> {
        self.years.iter().position(|&y| y == year)
    }

    pub fn level(&self, level: f64) -> Option<&BandLevel> {
        self.levels.iter().find(|b| (b.level - level).abs() < 1e-9)
    }

    /// `(lower, upper)` of `level` in `year`.
    pub fn interval(&self, level: f64, year: i32) -> Option<(f64, f64)> {
        let i = self.index_of(year)?;
        let b = self.level(level)?;
        Some((b.lower[i], b.upper[i]))
    }

    pub fn width(&self, level: f64, year: i32) -> Option<f64> {
        self.interval(level, year).map(|(a, b)| b - a)
    }

    pub fn median_at(&self, year: i32) -> Option<f64> {
        self.index_of(year).map(|i| self.median[i])
    }

    pub fn mean_at(&self, year: i32) -> Option<f64> {
        self.index_of(year).map(|i| self.mean[i])
    }

    /// Restricts the band to `[first, last]`.
    pub fn window(&self, first: i32, last: i32) -> Self {
        let keep: Vec<usize> = (0..self.years.len())
            .filter(|&i| self.years[i] >= first && self.years[i] <= last)
            .collect();
        let pick = |v: &Vec<f64>| keep.iter().map(|&i| v[i]).collect::<Vec<_>>();
        CredibleBand {
            years: keep.iter().map(|&i| self.years[i]).collect(),
            median: pick(&self.median),
            mean: pick(&self.mean),
            levels: self
                .levels
                .iter()
                .map(|b| BandLevel {
                    level: b.level,
                    lower: pick(&b.lower),
                    upper: pick(&b.upper),
                })
                .collect(),
            ..self.clone()
        }
    }

    /// Checks `lower <= median <= upper` and nesting of levels.
    pub fn check_ordering(&self) -> Result<()> {
        for (i, &m) in self.median.iter().enumerate() {
            let mut prev = (m, m);
            for b in &self.levels {
                let (lo, hi) = (b.lower[i], b.upper[i]);
                if !(lo <= prev.0 && hi >= prev.1) {
                    return Err(Error::Data(format!(
                        "band ordering violated in {} at level {}",
                        self.years[i], b.level
                    )));
                }
                prev = (lo, hi);
            }
        }
        Ok(())
    }

    /// CSV with columns `year, median, lo<L>, hi<L>...` (levels in percent).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("year,median");
        for b in &self.levels {
            let pct = (b.level * 100.0).round() as i64;
            out.push_str(&format!(",lo{pct},hi{pct}"));
        }
        out.push('\n');
        for (i, y) in self.years.iter().enumerate() {
            out.push_str(&format!("{y},{}", self.median[i]));
            for b in &self.levels {
                out.push_str(&format!(",{},{}", b.lower[i], b.upper[i]));
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&v, 0.0), 1.0);
        assert_eq!(quantile_sorted(&v, 1.0), 4.0);
        assert_eq!(quantile_sorted(&v, 0.5), 2.5);
    }

    #[test]
    fn identical_members_give_zero_width() {
        let m = vec![vec![1.0, 2.0]; 10];
        let b = CredibleBand::from_ensemble(vec![2000, 2001], &m, &DEFAULT_LEVELS, Provenance::Deterministic)
            .unwrap();
        assert_eq!(b.width(0.9, 2001), Some(0.0));
        assert_eq!(b.median, vec![1.0, 2.0]);
        b.check_ordering().unwrap();
    }

    #[test]
    fn csv_header_matches_levels() {
        let m: Vec<Vec<f64>> = (0..100).map(|k| vec![k as f64]).collect();
        let b = CredibleBand::from_ensemble(vec![2050], &m, &[0.99, 0.9], Provenance::ParameterOnly).unwrap();
        assert!(b.to_csv().starts_with("year,median,lo90,hi90,lo99,hi99\n"));
        b.check_ordering().unwrap();
        let (lo, hi) = b.interval(0.9, 2050).unwrap();
        assert!((lo - 4.95).abs() < 1e-12 && (hi - 94.05).abs() < 1e-12);
    }
}
