use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fair::{ParameterVector, N_PARAMS, PARAM_NAMES};

const MAGIC: &[u8; 8] = b"TACHAIN1";

/// Stored MCMC output. Samples are row-major, one row of `dim` values per kept iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorChain {
    pub dim: usize,
    pub names: Vec<String>,
    #[serde(skip)]
    pub samples: Vec<f64>,
    #[serde(skip)]
    pub log_posterior: Vec<f64>,
    pub acceptance_rate: f64,
    pub stage1_acceptance: f64,
    pub stage2_acceptance: f64,
    /// Number of leading stored samples treated as burn-in.
    pub burn_in: usize,
    pub n_iter: usize,
    pub thin: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proposal_covariance_history: Option<Vec<Vec<f64>>>,
    /// Content hash assigned when the chain is persisted or registered.
    #[serde(default)]
    pub id: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct ChainMeta {
    #[serde(flatten)]
    chain: PosteriorChain,
    n_samples: usize,
    #[serde(default)]
    config: serde_json::Value,
}

impl PosteriorChain {
    /// A chain made of given rows, with no burn-in; useful for fixed ensembles.
    pub fn from_rows(rows: &[Vec<f64>], log_posterior: Option<Vec<f64>>) -> Result<Self> {
        let dim = rows.first().map(Vec::len).unwrap_or(0);
        if dim == 0 || rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Data(
                "chain rows must be non-empty and of equal length".into(),
            ));
        }
        let lp = log_posterior.unwrap_or_else(|| vec![0.0; rows.len()]);
        if lp.len() != rows.len() {
            return Err(Error::Data("one log-posterior value per row is required".into()));
        }
        Ok(PosteriorChain {
            dim,
            names: default_names(dim),
            samples: rows.concat(),
            log_posterior: lp,
            acceptance_rate: 0.0,
            stage1_acceptance: 0.0,
            stage2_acceptance: 0.0,
            burn_in: 0,
            n_iter: rows.len(),
            thin: 1,
            seed: 0,
            proposal_covariance_history: None,
            id: None,
        })
    }

    pub fn len(&self) -> usize {
        self.log_posterior.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_posterior.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.samples[i * self.dim..(i + 1) * self.dim]
    }

    /// Samples after burn-in.
    pub fn retained(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.samples[self.burn_in * self.dim..].chunks_exact(self.dim)
    }

    pub fn n_retained(&self) -> usize {
        self.len() - self.burn_in
    }

    pub fn retained_column(&self, j: usize) -> Vec<f64> {
        self.retained().map(|r| r[j]).collect()
    }

    /// Retained sample `i` as a climate-model parameter vector.
    pub fn parameter(&self, i: usize) -> Result<ParameterVector> {
        if self.dim != N_PARAMS {
            return Err(Error::Data(format!(
                "chain has dimension {}, not {N_PARAMS}",
                self.dim
            )));
        }
        ParameterVector::from_slice(self.row(self.burn_in + i))
    }

    /// Componentwise median of the retained samples.
    pub fn median(&self) -> Vec<f64> {
        (0..self.dim)
            .map(|j| {
                let mut c = self.retained_column(j);
                c.sort_by(f64::total_cmp);
                crate::uncertainty::quantile_sorted(&c, 0.5)
            })
            .collect()
    }

    pub fn mean(&self) -> Vec<f64> {
        let n = self.n_retained() as f64;
        let mut m = vec![0.0; self.dim];
        for r in self.retained() {
            for (a, b) in m.iter_mut().zip(r) {
                *a += b / n;
            }
        }
        m
    }

    /// Overrides the burn-in length.
    pub fn with_burn_in(mut self, burn_in: usize) -> Result<Self> {
        if burn_in >= self.len() {
            return Err(Error::Config(format!(
                "burn-in {burn_in} leaves no samples of {}",
                self.len()
            )));
        }
        self.burn_in = burn_in;
        Ok(self)
    }

    pub fn with_parameter_names(mut self) -> Self {
        if self.dim == N_PARAMS {
            self.names = PARAM_NAMES.iter().map(|s| s.to_string()).collect();
        }
        self
    }

    /// Short content hash of the samples, stable across runs.
    pub fn content_id(&self) -> String {
        // FNV-1a over the raw sample bytes
        let mut h: u64 = 0xcbf29ce484222325;
        for v in self.samples.iter().chain(&self.log_posterior) {
            for b in v.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        }
        format!("chain-{h:016x}")
    }

    /// Writes `<base>.chain` (columnar little-endian f64) and `<base>.json` (metadata).
    pub fn save(&self, base: impl AsRef<Path>, config: serde_json::Value) -> Result<(PathBuf, PathBuf)> {
        let base = base.as_ref();
        let bin = base.with_extension("chain");
        let meta = base.with_extension("json");
        let n = self.len();
        let mut buf = Vec::with_capacity(24 + 8 * n * (self.dim + 1));
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&(self.dim as u64).to_le_bytes());
        buf.extend_from_slice(&(n as u64).to_le_bytes());
        for j in 0..self.dim {
            for i in 0..n {
                buf.extend_from_slice(&self.samples[i * self.dim + j].to_le_bytes());
            }
        }
        for v in &self.log_posterior {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        let mut f = fs::File::create(&bin).map_err(|e| Error::io(&bin, e))?;
        f.write_all(&buf).map_err(|e| Error::io(&bin, e))?;

        let mut chain = self.clone();
        chain.id.get_or_insert_with(|| self.content_id());
        let m = ChainMeta {
            chain,
            n_samples: n,
            config,
        };
        fs::write(&meta, serde_json::to_string_pretty(&m)?).map_err(|e| Error::io(&meta, e))?;
        Ok((bin, meta))
    }

    /// Loads a chain written by [`save`](Self::save); `base` may name either file or neither extension.
    pub fn load(base: impl AsRef<Path>) -> Result<Self> {
        let base = base.as_ref();
        let bin = base.with_extension("chain");
        let meta_path = base.with_extension("json");
        let raw = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
        let meta: ChainMeta = serde_json::from_str(&raw)?;
        let mut bytes = Vec::new();
        fs::File::open(&bin)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(&bin, e))?;
        if bytes.len() < 24 || &bytes[..8] != MAGIC {
            return Err(Error::Format(format!("{} is not a chain file", bin.display())));
        }
        let word = |k: usize| u64::from_le_bytes(bytes[8 + 8 * k..16 + 8 * k].try_into().unwrap()) as usize;
        let (dim, n) = (word(0), word(1));
        if dim != meta.chain.dim || n != meta.n_samples || bytes.len() != 24 + 8 * n * (dim + 1) {
            return Err(Error::Format("chain file and metadata disagree".into()));
        }
        let val = |k: usize| f64::from_le_bytes(bytes[24 + 8 * k..32 + 8 * k].try_into().unwrap());
        let mut samples = vec![0.0; n * dim];
        for j in 0..dim {
            for i in 0..n {
                samples[i * dim + j] = val(j * n + i);
            }
        }
        let log_posterior = (0..n).map(|i| val(dim * n + i)).collect();
        let mut chain = meta.chain;
        chain.samples = samples;
        chain.log_posterior = log_posterior;
        if chain.burn_in >= n.max(1) {
            return Err(Error::Format("burn-in exceeds stored samples".into()));
        }
        Ok(chain)
    }
}

fn default_names(dim: usize) -> Vec<String> {
    if dim == N_PARAMS {
        PARAM_NAMES.iter().map(|s| s.to_string()).collect()
    } else {
        (0..dim).map(|i| format!("x{i}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn save_load_round_trip() {
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|i| vec![i as f64, -(i as f64) * 0.5, 1e-300])
            .collect();
        let lp: Vec<f64> = (0..50).map(|i| -(i as f64)).collect();
        let ch = PosteriorChain::from_rows(&rows, Some(lp))
            .unwrap()
            .with_burn_in(10)
            .unwrap();
        let d = tempfile::tempdir().unwrap();
        ch.save(d.path().join("c"), serde_json::json!({"k": 1})).unwrap();
        let back = PosteriorChain::load(d.path().join("c")).unwrap();
        assert_eq!(back.samples, ch.samples);
        assert_eq!(back.log_posterior, ch.log_posterior);
        assert_eq!(back.burn_in, 10);
        assert_eq!(back.id, Some(ch.content_id()));
        assert_eq!(back.retained().len(), 40);
    }

    #[test]
    fn corrupt_file_rejected() {
        let d = tempfile::tempdir().unwrap();
        let ch = PosteriorChain::from_rows(&[vec![1.0], vec![2.0]], None).unwrap();
        ch.save(d.path().join("c"), serde_json::Value::Null).unwrap();
        fs::write(d.path().join("c.chain"), b"garbage").unwrap();
        assert!(matches!(
            PosteriorChain::load(d.path().join("c")),
            Err(Error::Format(_))
        ));
    }
}
