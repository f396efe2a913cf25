//! Posterior model probabilities from importance-sampled marginal likelihoods.
//!
//! For each model a Gaussian is fitted to its retained chain, its covariance
//! inflated by `inflation`, and used as the importance proposal `g`:
//! `Z ~= mean(p(y|theta) p(theta) / g(theta))`, `theta ~ g`. The estimate is unbiased
//! whenever `g` covers the posterior, and has low variance when the posterior is
//! close to Gaussian.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::chain::PosteriorChain;

/// One candidate model: its unnormalized log posterior `log p(y|theta) + log p(theta)`
/// and a chain sampled from it.
pub struct EvidenceModel<'a> {
    pub name: String,
    pub log_joint: &'a (dyn Fn(&[f64]) -> f64 + Sync),
    pub chain: &'a PosteriorChain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceConfig {
    pub n_samples: usize,
    /// Multiplier on the fitted covariance.
    pub inflation: f64,
    pub seed: u64,
}

impl Default for EvidenceConfig {
    fn default() -> Self {
        EvidenceConfig {
            n_samples: 20_000,
            inflation: 1.5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelComparison {
    pub names: Vec<String>,
    pub log_evidence: Vec<f64>,
    pub probabilities: Vec<f64>,
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Importance-sampling estimate of log Z for one model.
pub fn log_evidence(model: &EvidenceModel, cfg: &EvidenceConfig) -> Result<f64> {
    let ch = model.chain;
    let d = ch.dim;
    let n = ch.n_retained();
    if n < d + 2 {
        return Err(Error::Sampler(format!(
            "model '{}': chain too short to fit a proposal",
            model.name
        )));
    }
    let mean = DVector::from_vec(ch.mean());
    let mut cov = DMatrix::zeros(d, d);
    for r in ch.retained() {
        let dx = DVector::from_column_slice(r) - &mean;
        cov.ger(1.0 / (n as f64 - 1.0), &dx, &dx, 1.0);
    }
    cov *= cfg.inflation;
    let scale = (0..d).map(|i| cov[(i, i)]).fold(0.0, f64::max).max(1e-300);
    let chol = (0..8)
        .find_map(|k| {
            let jitter = if k == 0 {
                0.0
            } else {
                scale * 1e-12 * 10f64.powi(k)
            };
            (&cov + DMatrix::identity(d, d) * jitter).cholesky()
        })
        .ok_or_else(|| Error::Sampler(format!("model '{}': chain covariance is singular", model.name)))?;
    let l = chol.l();
    let log_det: f64 = (0..d).map(|i| l[(i, i)].ln()).sum::<f64>() * 2.0;
    let log_norm = -0.5 * (d as f64 * (2.0 * std::f64::consts::PI).ln() + log_det);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut logw = Vec::with_capacity(cfg.n_samples);
    for _ in 0..cfg.n_samples {
        let z = DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
        let x = &mean + &l * &z;
        let lq = log_norm - 0.5 * z.norm_squared();
        logw.push((model.log_joint)(x.as_slice()) - lq);
    }
    let lz = log_sum_exp(&logw) - (cfg.n_samples as f64).ln();
    if !lz.is_finite() {
        return Err(Error::Sampler(format!(
            "model '{}': evidence estimate is not finite ({lz})",
            model.name
        )));
    }
    Ok(lz)
}

/// Posterior probability of each model given prior model probabilities.
pub fn model_posterior(
    models: &[EvidenceModel],
    model_priors: &[f64],
    cfg: &EvidenceConfig,
) -> Result<ModelComparison> {
    if models.len() < 2 || models.len() != model_priors.len() {
        return Err(Error::Config(
            "need at least two models and one prior probability per model".into(),
        ));
    }
    if model_priors.iter().any(|p| !(*p >= 0.0)) || model_priors.iter().sum::<f64>() <= 0.0 {
        return Err(Error::Config(
            "model priors must be non-negative with positive sum".into(),
        ));
    }
    let mut log_z = Vec::with_capacity(models.len());
    for (m, &p) in models.iter().zip(model_priors) {
        // a model with no prior mass cannot gain posterior mass; skip its estimator
        log_z.push(if p > 0.0 { log_evidence(m, cfg)? } else { f64::NAN });
    }
    let log_post: Vec<f64> = log_z
        .iter()
        .zip(model_priors)
        .map(|(z, p)| if *p > 0.0 { z + p.ln() } else { f64::NEG_INFINITY })
        .collect();
    let norm = log_sum_exp(&log_post);
    Ok(ModelComparison {
        names: models.iter().map(|m| m.name.clone()).collect(),
        log_evidence: log_z,
        probabilities: log_post.iter().map(|v| (v - norm).exp()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian_chain(mean: f64, sd: f64, n: usize) -> PosteriorChain {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                vec![mean + sd * z]
            })
            .collect();
        PosteriorChain::from_rows(&rows, None).unwrap()
    }

    #[test]
    fn normalized_gaussian_has_unit_evidence() {
        let f = |x: &[f64]| -0.5 * x[0] * x[0] - 0.5 * (2.0 * std::f64::consts::PI).ln() + 2.0;
        let ch = gaussian_chain(0.0, 1.0, 5000);
        let m = EvidenceModel {
            name: "g".into(),
            log_joint: &f,
            chain: &ch,
        };
        let lz = log_evidence(&m, &EvidenceConfig::default()).unwrap();
        assert!((lz - 2.0).abs() < 0.02, "{lz}");
    }

    #[test]
    fn identical_models_split_evenly_and_prior_mass_forces() {
        let f = |x: &[f64]| -0.5 * x[0] * x[0];
        let ch = gaussian_chain(0.0, 1.0, 5000);
        let mk = |name: &str| EvidenceModel {
            name: name.into(),
            log_joint: &f,
            chain: &ch,
        };
        let models = [mk("a"), mk("b")];
        let r = model_posterior(&models, &[0.5, 0.5], &EvidenceConfig::default()).unwrap();
        assert!((r.probabilities[0] - 0.5).abs() < 1e-12);
        let r = model_posterior(&models, &[1.0, 0.0], &EvidenceConfig::default()).unwrap();
        assert_eq!(r.probabilities, vec![1.0, 0.0]);
    }

    #[test]
    fn non_finite_evidence_names_model() {
        let f = |_: &[f64]| f64::NEG_INFINITY;
        let g = |x: &[f64]| -0.5 * x[0] * x[0];
        let ch = gaussian_chain(0.0, 1.0, 500);
        let models = [
            EvidenceModel {
                name: "ok".into(),
                log_joint: &g,
                chain: &ch,
            },
            EvidenceModel {
                name: "broken".into(),
                log_joint: &f,
                chain: &ch,
            },
        ];
        let err = model_posterior(&models, &[0.5, 0.5], &EvidenceConfig::default()).unwrap_err();
        assert!(err.to_string().contains("broken"));
    }
}
