//! Neural-network surrogate for posterior-predictive temperature bands.
//!
//! The emulator maps base-year CO2-equivalent emissions (scaling every gas of
//! every scenario from the base year on) to per-scenario, per-year mean,
//! median, 5% and 95% temperature quantiles. Inputs are z-scored, outputs are
//! z-scored per column, and the network is trained with Adam on an 80/20 split.

mod mlp;
mod training;

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use mlp::{Adam, Dense, LayerGrads, Mlp};
pub use training::{generate_training_set, GenerationConfig, TrainingSet, QUANTITIES};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"TAEMUL01";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Learning rate at the last epoch relative to the first (exponential decay).
    pub final_lr_fraction: f64,
    pub batch_size: usize,
    pub validation_fraction: f64,
    pub seed: u64,
    /// Validation MSE (normalized units) above which the model is flagged unconverged.
    pub max_validation_loss: Option<f64>,
    /// Inputs further than this fraction of the training range outside it draw a warning.
    pub extrapolation_margin: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden: vec![20, 20, 20],
            epochs: 3000,
            learning_rate: 1e-2,
            final_lr_fraction: 0.1,
            batch_size: 32,
            validation_fraction: 0.2,
            seed: 0,
            max_validation_loss: Some(1e-2),
            extrapolation_margin: 0.1,
        }
    }
}

/// Provenance and training history stored with a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub config: TrainConfig,
    pub activation: String,
    pub optimizer: String,
    pub source: String,
    pub n_draws: usize,
    pub label_seed: u64,
    pub n_train: usize,
    pub n_validation: usize,
    pub train_loss: Vec<f64>,
    pub validation_loss: Vec<f64>,
    pub converged: bool,
    /// Holdout RMSE in K (medians, quantiles).
    pub validation_rmse_median: Option<f64>,
    pub validation_rmse_quantiles: Option<f64>,
}

/// Everything except the weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmulatorMeta {
    pub version: u32,
    pub id: String,
    pub layer_sizes: Vec<usize>,
    pub scenarios: Vec<String>,
    pub years: Vec<i32>,
    pub quantities: Vec<String>,
    pub base_year: i32,
    pub reference_scenario: String,
    pub reference_co2e: f64,
    pub input_mean: Vec<f64>,
    pub input_sd: Vec<f64>,
    pub input_min: Vec<f64>,
    pub input_max: Vec<f64>,
    pub output_mean: Vec<f64>,
    pub output_sd: Vec<f64>,
    pub training: TrainingMeta,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmulatorModel {
    pub meta: EmulatorMeta,
    pub net: Mlp,
}

/// Band summaries of one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioPrediction {
    pub scenario: String,
    pub years: Vec<i32>,
    pub mean: Vec<f64>,
    pub median: Vec<f64>,
    pub q05: Vec<f64>,
    pub q95: Vec<f64>,
}

impl ScenarioPrediction {
    pub fn at(&self, year: i32) -> Option<(f64, f64, f64, f64)> {
        let i = self.years.iter().position(|&y| y == year)?;
        Some((self.mean[i], self.median[i], self.q05[i], self.q95[i]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub model_id: String,
    pub input: Vec<f64>,
    pub scenarios: Vec<ScenarioPrediction>,
    /// Set when the input lies outside the training envelope plus margin.
    pub warning: Option<String>,
}

impl Prediction {
    pub fn scenario(&self, id: &str) -> Option<&ScenarioPrediction> {
        self.scenarios.iter().find(|s| s.scenario == id)
    }
}

fn moments(cols: usize, rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = rows.len() as f64;
    let mut mean = vec![0.0; cols];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v / n;
        }
    }
    let mut var = vec![0.0; cols];
    for r in rows {
        for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
            *s += (v - m) * (v - m) / n;
        }
    }
    // constant columns keep unit scale so the map stays invertible
    let sd = var
        .iter()
        .map(|v| if v.sqrt() > 1e-12 { v.sqrt() } else { 1.0 })
        .collect();
    (mean, sd)
}

fn to_matrix(rows: &[&Vec<f64>], mean: &[f64], sd: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(mean.len(), rows.len(), |i, j| (rows[j][i] - mean[i]) / sd[i])
}

fn fnv(bytes: impl IntoIterator<Item = u8>) -> String {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    format!("{h:016x}")
}

/// Trains a network on `ts`, holding out `validation_fraction` of the grid points.
pub fn train(ts: &TrainingSet, cfg: &TrainConfig) -> Result<EmulatorModel> {
    ts.validate()?;
    if ts.len() < 2 {
        return Err(Error::Training("need at least two grid points".into()));
    }
    if cfg.epochs == 0 || cfg.batch_size == 0 || !(cfg.learning_rate > 0.0) {
        return Err(Error::Config(
            "epochs, batch size and learning rate must be positive".into(),
        ));
    }
    if !(0.0..1.0).contains(&cfg.validation_fraction) {
        return Err(Error::Config("validation fraction must lie in [0, 1)".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..ts.len()).collect();
    order.shuffle(&mut rng);
    let n_val = ((ts.len() as f64) * cfg.validation_fraction).round() as usize;
    let n_val = n_val.min(ts.len() - 1);
    let (val_idx, train_idx) = order.split_at(n_val);

    let n_in = ts.inputs[0].len();
    let n_out = ts.labels[0].len();
    let train_x: Vec<Vec<f64>> = train_idx.iter().map(|&i| ts.inputs[i].clone()).collect();
    let train_y: Vec<Vec<f64>> = train_idx.iter().map(|&i| ts.labels[i].clone()).collect();
    let (in_mean, in_sd) = moments(n_in, &train_x);
    let (out_mean, out_sd) = moments(n_out, &train_y);
    let xm = |idx: &[usize]| {
        to_matrix(
            &idx.iter().map(|&i| &ts.inputs[i]).collect::<Vec<_>>(),
            &in_mean,
            &in_sd,
        )
    };
    let ym = |idx: &[usize]| {
        to_matrix(
            &idx.iter().map(|&i| &ts.labels[i]).collect::<Vec<_>>(),
            &out_mean,
            &out_sd,
        )
    };
    let (vx, vy) = (xm(val_idx), ym(val_idx));

    let mut sizes = vec![n_in];
    sizes.extend(&cfg.hidden);
    sizes.push(n_out);
    let mut net = Mlp::new(&sizes, &mut rng)?;
    let mut adam = Adam::new(&net);
    let mut train_loss = Vec::with_capacity(cfg.epochs);
    let mut validation_loss = Vec::with_capacity(cfg.epochs);
    let mut batch_order: Vec<usize> = train_idx.to_vec();
    let decay = cfg.final_lr_fraction.max(1e-12).ln() / cfg.epochs.max(2).saturating_sub(1) as f64;
    for epoch in 0..cfg.epochs {
        let lr = cfg.learning_rate * (decay * epoch as f64).exp();
        batch_order.shuffle(&mut rng);
        let mut sum = 0.0;
        for chunk in batch_order.chunks(cfg.batch_size) {
            let (loss, grads) = net.loss_and_grad(&xm(chunk), &ym(chunk));
            if !loss.is_finite() {
                return Err(Error::Training(format!(
                    "loss became {loss} in epoch {epoch} (learning rate {lr:.3e}); try a smaller learning rate"
                )));
            }
            sum += loss * chunk.len() as f64;
            adam.step(&mut net, &grads, lr);
        }
        train_loss.push(sum / batch_order.len() as f64);
        if n_val > 0 {
            let d = net.forward(&vx) - &vy;
            validation_loss.push(d.norm_squared() / d.len() as f64);
        }
    }
    let final_val = validation_loss.last().copied();
    let converged = match (cfg.max_validation_loss, final_val) {
        (Some(cap), Some(v)) => v <= cap,
        _ => true,
    };
    let input_min = (0..n_in)
        .map(|j| train_x.iter().map(|r| r[j]).fold(f64::INFINITY, f64::min))
        .collect();
    let input_max = (0..n_in)
        .map(|j| train_x.iter().map(|r| r[j]).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let mut model = EmulatorModel {
        meta: EmulatorMeta {
            version: FORMAT_VERSION,
            id: String::new(),
            layer_sizes: sizes,
            scenarios: ts.scenarios.clone(),
            years: ts.years.clone(),
            quantities: QUANTITIES.iter().map(|s| s.to_string()).collect(),
            base_year: ts.base_year,
            reference_scenario: ts.reference_scenario.clone(),
            reference_co2e: ts.reference_co2e,
            input_mean: in_mean,
            input_sd: in_sd,
            input_min,
            input_max,
            output_mean: out_mean,
            output_sd: out_sd,
            training: TrainingMeta {
                config: cfg.clone(),
                activation: "tanh".into(),
                optimizer: "adam".into(),
                source: ts.source.clone(),
                n_draws: ts.n_draws,
                label_seed: ts.seed,
                n_train: train_idx.len(),
                n_validation: n_val,
                train_loss,
                validation_loss,
                converged,
                validation_rmse_median: None,
                validation_rmse_quantiles: None,
            },
        },
        net,
    };
    if n_val > 0 {
        let m = model.evaluate(&ts.select(val_idx))?;
        model.meta.training.validation_rmse_median = Some(m.rmse_median);
        model.meta.training.validation_rmse_quantiles = Some(m.rmse_quantiles);
    }
    model.meta.id = model.content_id();
    Ok(model)
}

/// Root-mean-square errors in K against labelled points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub rmse_mean: f64,
    pub rmse_median: f64,
    /// Over both q05 and q95.
    pub rmse_quantiles: f64,
    /// Largest absolute median error.
    pub max_abs_median: f64,
}

impl EmulatorModel {
    pub fn id(&self) -> &str {
        &self.meta.id
    }

    /// Hash of the weights and the metadata that affects predictions.
    pub fn content_id(&self) -> String {
        let mut bytes: Vec<u8> = self.net.to_flat().iter().flat_map(|v| v.to_le_bytes()).collect();
        for v in self
            .meta
            .input_mean
            .iter()
            .chain(&self.meta.input_sd)
            .chain(&self.meta.output_mean)
            .chain(&self.meta.output_sd)
        {
            bytes.extend(v.to_le_bytes());
        }
        bytes.extend(self.meta.scenarios.join(",").bytes());
        fnv(bytes)
    }

    /// Input corresponding to scaling all emissions from the base year by `k`.
    pub fn input_for_scale(&self, k: f64) -> Vec<f64> {
        vec![k * self.meta.reference_co2e]
    }

    fn raw(&self, inputs: &[Vec<f64>]) -> DMatrix<f64> {
        let rows: Vec<&Vec<f64>> = inputs.iter().collect();
        let x = to_matrix(&rows, &self.meta.input_mean, &self.meta.input_sd);
        let mut y = self.net.forward(&x);
        for (i, mut row) in y.row_iter_mut().enumerate() {
            let (m, s) = (self.meta.output_mean[i], self.meta.output_sd[i]);
            row.apply(|v| *v = *v * s + m);
        }
        y
    }

    fn envelope_warning(&self, input: &[f64]) -> Option<String> {
        let m = &self.meta;
        for (j, v) in input.iter().enumerate() {
            let margin =
                self.meta.training.config.extrapolation_margin * (m.input_max[j] - m.input_min[j]).abs();
            if *v < m.input_min[j] - margin || *v > m.input_max[j] + margin {
                return Some(format!(
                    "input {v} outside training range [{}, {}]; result is an extrapolation",
                    m.input_min[j], m.input_max[j]
                ));
            }
        }
        None
    }

    fn unpack(&self, col: &[f64]) -> Vec<ScenarioPrediction> {
        let ny = self.meta.years.len();
        self.meta
            .scenarios
            .iter()
            .enumerate()
            .map(|(s, id)| {
                let mut p = ScenarioPrediction {
                    scenario: id.clone(),
                    years: self.meta.years.clone(),
                    mean: Vec::with_capacity(ny),
                    median: Vec::with_capacity(ny),
                    q05: Vec::with_capacity(ny),
                    q95: Vec::with_capacity(ny),
                };
                for t in 0..ny {
                    let o = (s * ny + t) * 4;
                    let mut q = [col[o + 2], col[o + 1], col[o + 3]];
                    q.sort_by(f64::total_cmp);
                    p.mean.push(col[o]);
                    p.q05.push(q[0]);
                    p.median.push(q[1]);
                    p.q95.push(q[2]);
                }
                p
            })
            .collect()
    }

    /// Band summaries for one input, quantiles sorted so `q05 <= median <= q95`.
    pub fn predict(&self, input: &[f64]) -> Result<Prediction> {
        let n_in = self.meta.input_mean.len();
        if input.len() != n_in || input.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data(format!(
                "emulator expects {n_in} finite input value(s)"
            )));
        }
        let y = self.raw(&[input.to_vec()]);
        Ok(Prediction {
            model_id: self.meta.id.clone(),
            input: input.to_vec(),
            scenarios: self.unpack(y.column(0).as_slice()),
            warning: self.envelope_warning(input),
        })
    }

    /// Errors against labelled points, in K.
    pub fn evaluate(&self, ts: &TrainingSet) -> Result<Metrics> {
        if ts.is_empty() {
            return Err(Error::Data("no points to evaluate".into()));
        }
        if ts.labels[0].len() != self.meta.output_mean.len() {
            return Err(Error::Data("label layout differs from the model".into()));
        }
        let y = self.raw(&ts.inputs);
        let (mut se_mean, mut se_med, mut se_q, mut max_med) = (0.0, 0.0, 0.0, 0.0f64);
        let mut n = 0usize;
        for (j, label) in ts.labels.iter().enumerate() {
            let pred: Vec<f64> = self
                .unpack(y.column(j).as_slice())
                .into_iter()
                .flat_map(|p| {
                    (0..p.years.len()).flat_map(move |t| [p.mean[t], p.median[t], p.q05[t], p.q95[t]])
                })
                .collect();
            for (c, l) in pred.chunks(4).zip(label.chunks(4)) {
                se_mean += (c[0] - l[0]).powi(2);
                se_med += (c[1] - l[1]).powi(2);
                se_q += (c[2] - l[2]).powi(2) + (c[3] - l[3]).powi(2);
                max_med = max_med.max((c[1] - l[1]).abs());
                n += 1;
            }
        }
        let n = n as f64;
        Ok(Metrics {
            rmse_mean: (se_mean / n).sqrt(),
            rmse_median: (se_med / n).sqrt(),
            rmse_quantiles: (se_q / (2.0 * n)).sqrt(),
            max_abs_median: max_med,
        })
    }

    /// Writes `<base>.emu` (weights) and `<base>.json` (metadata).
    pub fn save(&self, base: impl AsRef<Path>) -> Result<(PathBuf, PathBuf)> {
        let base = base.as_ref();
        let bin = base.with_extension("emu");
        let json = base.with_extension("json");
        let flat = self.net.to_flat();
        let mut buf = Vec::with_capacity(20 + flat.len() * 8);
        buf.extend_from_slice(MAGIC);
        buf.extend(FORMAT_VERSION.to_le_bytes());
        buf.extend((flat.len() as u64).to_le_bytes());
        for v in &flat {
            buf.extend(v.to_le_bytes());
        }
        std::fs::File::create(&bin)
            .and_then(|mut f| f.write_all(&buf))
            .map_err(|e| Error::io(&bin, e))?;
        std::fs::write(&json, serde_json::to_string_pretty(&self.meta)?).map_err(|e| Error::io(&json, e))?;
        Ok((bin, json))
    }

    pub fn load(base: impl AsRef<Path>) -> Result<Self> {
        let base = base.as_ref();
        let bin = base.with_extension("emu");
        let json = base.with_extension("json");
        let text = std::fs::read_to_string(&json).map_err(|e| Error::io(&json, e))?;
        let meta: EmulatorMeta = serde_json::from_str(&text)?;
        if meta.version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported emulator version {}",
                meta.version
            )));
        }
        let mut bytes = Vec::new();
        std::fs::File::open(&bin)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(&bin, e))?;
        if bytes.len() < 20 || &bytes[..8] != MAGIC {
            return Err(Error::Format(format!(
                "{} is not an emulator weight file",
                bin.display()
            )));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        let n = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
        if version != FORMAT_VERSION || bytes.len() != 20 + 8 * n {
            return Err(Error::Format(format!(
                "{} is truncated or of another version",
                bin.display()
            )));
        }
        let flat: Vec<f64> = bytes[20..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let net = Mlp::from_flat(&meta.layer_sizes, &flat)?;
        let model = EmulatorModel { meta, net };
        if model.content_id() != model.meta.id {
            return Err(Error::Format(
                "emulator weights do not match their metadata id".into(),
            ));
        }
        Ok(model)
    }
}
