//! Delayed-rejection adaptive Metropolis.
//!
//! Adaptive part: after a warm-up with a fixed proposal, the Gaussian proposal
//! covariance is `s_d * (Cov(history) + eps * I)`, refreshed every
//! `adapt_interval` iterations from a running mean and covariance of the whole
//! chain. Delayed rejection: when the first proposal `y1` is rejected, a second
//! proposal `y2` is drawn from the covariance shrunk by `gamma` and accepted with
//!
//! ```text
//! a2 = min(1, p(y2) q1(y2, y1) (1 - a1(y2, y1)) / (p(x) q1(x, y1) (1 - a1(x, y1))))
//! ```
//!
//! which keeps the target invariant.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::chain::PosteriorChain;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DramConfig {
    pub n_iter: usize,
    pub seed: u64,
    /// Iterations with the initial proposal before adaptation begins.
    pub warmup: usize,
    pub adapt_interval: usize,
    /// Adaptation scale; `None` means `2.4^2 / d`.
    pub s_d: Option<f64>,
    pub epsilon: f64,
    /// Covariance shrink factor of the second stage.
    pub dr_gamma: f64,
    /// Initial proposal standard deviations; `None` means `0.1 * max(|x0|, 1e-3)`.
    pub initial_sd: Option<Vec<f64>>,
    /// Fraction of stored samples discarded as burn-in.
    pub burn_in_fraction: f64,
    /// Keep every `thin`-th iteration.
    pub thin: usize,
    /// Store the proposal covariance after each adaptation.
    pub record_covariance: bool,
}

impl Default for DramConfig {
    fn default() -> Self {
        DramConfig {
            n_iter: 10_000,
            seed: 0,
            warmup: 1000,
            adapt_interval: 100,
            s_d: None,
            epsilon: 1e-10,
            dr_gamma: 0.2,
            initial_sd: None,
            burn_in_fraction: 0.2,
            thin: 1,
            record_covariance: false,
        }
    }
}

impl DramConfig {
    pub fn validate(&self, dim: usize) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.n_iter == 0 || self.thin == 0 || self.adapt_interval == 0 {
            return bad("n_iter, thin and adapt_interval must be positive");
        }
        if !(self.dr_gamma > 0.0 && self.dr_gamma < 1.0) {
            return bad("dr_gamma must lie in (0, 1)");
        }
        if !(0.0..1.0).contains(&self.burn_in_fraction) {
            return bad("burn_in_fraction must lie in [0, 1)");
        }
        if self.epsilon < 0.0 || self.s_d.is_some_and(|s| s <= 0.0) {
            return bad("epsilon must be non-negative and s_d positive");
        }
        if let Some(sd) = &self.initial_sd {
            if sd.len() != dim || sd.iter().any(|s| !(*s > 0.0)) {
                return bad("initial_sd must have one positive entry per dimension");
            }
        }
        Ok(())
    }
}

/// Running mean and covariance (Welford).
struct Moments {
    n: f64,
    mean: DVector<f64>,
    m2: DMatrix<f64>,
}

impl Moments {
    fn new(d: usize) -> Self {
        Moments {
            n: 0.0,
            mean: DVector::zeros(d),
            m2: DMatrix::zeros(d, d),
        }
    }

    fn push(&mut self, x: &DVector<f64>) {
        self.n += 1.0;
        let delta = x - &self.mean;
        self.mean += &delta / self.n;
        let delta2 = x - &self.mean;
        self.m2.ger(1.0, &delta, &delta2, 1.0);
    }

    fn covariance(&self) -> DMatrix<f64> {
        let c = &self.m2 / (self.n - 1.0).max(1.0);
        // symmetrize against rounding drift
        (&c + c.transpose()) * 0.5
    }
}

fn cholesky_jittered(c: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let d = c.nrows();
    let scale = (0..d).map(|i| c[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    let mut jitter = 0.0;
    for _ in 0..12 {
        let m = c + DMatrix::identity(d, d) * jitter;
        if let Some(ch) = m.cholesky() {
            return Some(ch.l());
        }
        jitter = if jitter == 0.0 {
            1e-12 * scale
        } else {
            jitter * 10.0
        };
    }
    None
}

/// Runs a DRAM chain on an arbitrary log-density.
///
/// `log_density` may return `-inf` for points outside the support. `progress`
/// is called with the number of completed iterations every `adapt_interval` steps.
pub fn dram<F>(
    log_density: F,
    init: &[f64],
    cfg: &DramConfig,
    mut progress: impl FnMut(usize),
) -> Result<PosteriorChain>
where
    F: Fn(&[f64]) -> f64,
{
    let d = init.len();
    if d == 0 {
        return Err(Error::Config("cannot sample a zero-dimensional target".into()));
    }
    cfg.validate(d)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let s_d = cfg.s_d.unwrap_or(2.4 * 2.4 / d as f64);

    let mut x = DVector::from_column_slice(init);
    let mut lp_x = log_density(x.as_slice());
    if !lp_x.is_finite() {
        return Err(Error::Sampler(format!("initial point has log-density {lp_x}")));
    }

    let init_sd: Vec<f64> = cfg
        .initial_sd
        .clone()
        .unwrap_or_else(|| init.iter().map(|v| 0.1 * v.abs().max(1e-3)).collect());
    let mut chol = DMatrix::from_diagonal(&DVector::from_vec(init_sd));
    let gamma_sqrt = cfg.dr_gamma.sqrt();

    let n_keep = cfg.n_iter / cfg.thin;
    let mut samples = Vec::with_capacity(n_keep * d);
    let mut log_post = Vec::with_capacity(n_keep);
    let mut cov_history = Vec::new();
    let mut moments = Moments::new(d);
    let (mut acc1, mut acc2, mut warm_acc) = (0usize, 0usize, 0usize);

    let mut z1 = DVector::zeros(d);
    let mut z2 = DVector::zeros(d);
    for it in 0..cfg.n_iter {
        z1.iter_mut().for_each(|v| *v = StandardNormal.sample(&mut rng));
        let y1 = &x + &chol * &z1;
        let lp_y1 = log_density(y1.as_slice());
        let a1 = accept_prob(lp_x, lp_y1);
        let u: f64 = rand::Rng::random(&mut rng);
        if u < a1 {
            x = y1;
            lp_x = lp_y1;
            acc1 += 1;
            if it < cfg.warmup {
                warm_acc += 1;
            }
        } else {
            z2.iter_mut().for_each(|v| *v = StandardNormal.sample(&mut rng));
            let y2 = &x + &chol * &z2 * gamma_sqrt;
            let lp_y2 = log_density(y2.as_slice());
            let u2: f64 = rand::Rng::random(&mut rng);
            if lp_y2.is_finite() {
                // q1(y2 -> y1) and q1(x -> y1) under the first-stage covariance
                let w = chol
                    .solve_lower_triangular(&(&y1 - &y2))
                    .unwrap_or_else(|| DVector::from_element(d, f64::INFINITY));
                let log_q_ratio = -0.5 * (w.norm_squared() - z1.norm_squared());
                let a1_rev = accept_prob(lp_y2, lp_y1);
                let num = lp_y2 + log_q_ratio + (1.0 - a1_rev).ln();
                let den = lp_x + (1.0 - a1).ln();
                let a2 = if a1_rev >= 1.0 {
                    0.0
                } else {
                    (num - den).exp().min(1.0)
                };
                if u2 < a2 {
                    x = y2;
                    lp_x = lp_y2;
                    acc2 += 1;
                    if it < cfg.warmup {
                        warm_acc += 1;
                    }
                }
            }
        }

        moments.push(&x);
        if (it + 1) % cfg.thin == 0 {
            samples.extend_from_slice(x.as_slice());
            log_post.push(lp_x);
        }

        if it + 1 == cfg.warmup && warm_acc == 0 {
            return Err(Error::Sampler(format!(
                "no proposal accepted during the {} warm-up iterations (log-density at start {lp_x}); \
                 the initial proposal scale is probably too large",
                cfg.warmup
            )));
        }
        if it + 1 >= cfg.warmup && (it + 1) % cfg.adapt_interval == 0 {
            let c = (moments.covariance() + DMatrix::identity(d, d) * cfg.epsilon) * s_d;
            if let Some(l) = cholesky_jittered(&c) {
                chol = l;
                if cfg.record_covariance {
                    cov_history.push(c.as_slice().to_vec());
                }
            }
            progress(it + 1);
        }
    }

    let n = log_post.len();
    let burn_in = ((n as f64) * cfg.burn_in_fraction).floor() as usize;
    Ok(PosteriorChain {
        dim: d,
        names: (0..d).map(|i| format!("x{i}")).collect(),
        samples,
        log_posterior: log_post,
        acceptance_rate: (acc1 + acc2) as f64 / cfg.n_iter as f64,
        stage1_acceptance: acc1 as f64 / cfg.n_iter as f64,
        stage2_acceptance: acc2 as f64 / cfg.n_iter as f64,
        burn_in,
        n_iter: cfg.n_iter,
        thin: cfg.thin,
        seed: cfg.seed,
        proposal_covariance_history: cfg.record_covariance.then_some(cov_history),
        id: None,
    })
}

fn accept_prob(lp_from: f64, lp_to: f64) -> f64 {
    if lp_to == f64::NEG_INFINITY {
        0.0
    } else {
        (lp_to - lp_from).exp().min(1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn std_normal(x: &[f64]) -> f64 {
        -0.5 * x.iter().map(|v| v * v).sum::<f64>()
    }

    #[test]
    fn seed_determinism() {
        let cfg = DramConfig {
            n_iter: 3000,
            seed: 7,
            ..Default::default()
        };
        let a = dram(std_normal, &[0.5, -0.5], &cfg, |_| {}).unwrap();
        let b = dram(std_normal, &[0.5, -0.5], &cfg, |_| {}).unwrap();
        assert_eq!(a.samples, b.samples);
        let c = dram(std_normal, &[0.5, -0.5], &DramConfig { seed: 8, ..cfg }, |_| {}).unwrap();
        assert_ne!(a.samples, c.samples);
    }

    #[test]
    fn zero_warmup_acceptance_aborts() {
        let cfg = DramConfig {
            n_iter: 2000,
            initial_sd: Some(vec![1e6]),
            ..Default::default()
        };
        let narrow = |x: &[f64]| if x[0].abs() < 1e-3 { 0.0 } else { f64::NEG_INFINITY };
        assert!(matches!(
            dram(narrow, &[0.0], &cfg, |_| {}),
            Err(Error::Sampler(_))
        ));
    }

    #[test]
    fn retained_samples_have_finite_density_and_respect_support() {
        let half = |x: &[f64]| if x[0] > 0.0 { -x[0] } else { f64::NEG_INFINITY };
        let cfg = DramConfig {
            n_iter: 5000,
            seed: 3,
            ..Default::default()
        };
        let ch = dram(half, &[1.0], &cfg, |_| {}).unwrap();
        assert!(ch.samples.iter().all(|&v| v > 0.0));
        assert!(ch.log_posterior.iter().all(|v| v.is_finite()));
        assert!(ch.acceptance_rate > 0.0 && ch.acceptance_rate < 1.0);
    }

    #[test]
    fn records_covariance_history() {
        let cfg = DramConfig {
            n_iter: 1500,
            record_covariance: true,
            ..Default::default()
        };
        let ch = dram(std_normal, &[0.0, 0.0], &cfg, |_| {}).unwrap();
        assert_eq!(ch.proposal_covariance_history.unwrap().len(), 6);
    }
}
