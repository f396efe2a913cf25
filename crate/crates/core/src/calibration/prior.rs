use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fair::{ParameterVector, N_PARAMS, PARAM_NAMES};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Family {
    Normal {
        mean: f64,
        sd: f64,
    },
    /// `ln x ~ N(mu, sigma)`.
    Lognormal {
        mu: f64,
        sigma: f64,
    },
    Uniform {
        lo: f64,
        hi: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prior {
    #[serde(flatten)]
    pub family: Family,
    /// Hard support bounds (exclusive); the density is zero outside.
    pub bounds: (f64, f64),
}

impl Prior {
    pub fn normal(mean: f64, sd: f64, bounds: (f64, f64)) -> Self {
        Prior {
            family: Family::Normal { mean, sd },
            bounds,
        }
    }

    /// Lognormal with the given median and log-scale spread.
    pub fn lognormal(median: f64, sigma: f64, bounds: (f64, f64)) -> Self {
        Prior {
            family: Family::Lognormal {
                mu: median.ln(),
                sigma,
            },
            bounds,
        }
    }

    pub fn uniform(lo: f64, hi: f64) -> Self {
        Prior {
            family: Family::Uniform { lo, hi },
            bounds: (lo, hi),
        }
    }

    pub fn in_support(&self, x: f64) -> bool {
        x > self.bounds.0 && x < self.bounds.1
    }

    /// Log-density (unnormalized with respect to truncation).
    pub fn log_density(&self, x: f64) -> f64 {
        if !x.is_finite() || !self.in_support(x) {
            return f64::NEG_INFINITY;
        }
        match self.family {
            Family::Normal { mean, sd } => {
                let z = (x - mean) / sd;
                -0.5 * z * z - sd.ln() - LN_SQRT_2PI
            }
            Family::Lognormal { mu, sigma } => {
                if x <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                let z = (x.ln() - mu) / sigma;
                -0.5 * z * z - sigma.ln() - x.ln() - LN_SQRT_2PI
            }
            Family::Uniform { lo, hi } => {
                if x >= lo && x <= hi {
                    -(hi - lo).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    pub fn mode(&self) -> f64 {
        let m = match self.family {
            Family::Normal { mean, .. } => mean,
            Family::Lognormal { mu, sigma } => (mu - sigma * sigma).exp(),
            Family::Uniform { lo, hi } => 0.5 * (lo + hi),
        };
        m.clamp(self.bounds.0, self.bounds.1)
    }

    /// Rough spread used to scale initial proposals.
    pub fn scale(&self) -> f64 {
        match self.family {
            Family::Normal { sd, .. } => sd,
            Family::Lognormal { sigma, .. } => self.mode() * sigma,
            Family::Uniform { lo, hi } => (hi - lo) / 12f64.sqrt(),
        }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        match self.family {
            Family::Normal { mean, sd } => mean + sd * z,
            Family::Lognormal { mu, sigma } => (mu + sigma * z).exp(),
            Family::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
        }
    }

    fn validate(&self, name: &str) -> Result<()> {
        let (lo, hi) = self.bounds;
        let ok = match self.family {
            Family::Normal { mean, sd } => sd > 0.0 && mean.is_finite(),
            Family::Lognormal { mu, sigma } => sigma > 0.0 && mu.is_finite() && lo >= 0.0,
            Family::Uniform { lo: a, hi: b } => a < b && a.is_finite() && b.is_finite(),
        };
        if !ok || lo.is_nan() || hi.is_nan() || lo >= hi {
            return Err(Error::Config(format!("invalid prior for '{name}': {self:?}")));
        }
        Ok(())
    }
}

/// One prior per entry of the parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub priors: Vec<Prior>,
}

impl PriorSpec {
    pub fn new(priors: Vec<Prior>) -> Result<Self> {
        let spec = PriorSpec { priors };
        spec.validate()?;
        Ok(spec)
    }

    /// Priors centred on the reference parameters.
    ///
    /// Carbon-cycle feedback coefficients get 13% relative spread and the
    /// doubling forcing 10%; thermal amplitudes and timescales are lognormal
    /// with a log-spread of 0.3 (amplitudes) and 0.25 (timescales). Methane
    /// and nitrous-oxide forcing scales have SD 0.12, the aerosol scale SD 0.6
    /// and the ozone and residual scales SD 0.3.
    pub fn fair_default() -> Self {
        let d = ParameterVector::fair_default();
        let p = |i: usize| d.0[i];
        let rel = |i: usize, r: f64, lo: f64, hi: f64| Prior::normal(p(i), r * p(i), (lo, hi));
        let priors = vec![
            rel(0, 0.1, 0.0, 1.0),
            rel(1, 0.1, 0.0, 1.0),
            rel(2, 0.1, 0.0, 1.0),
            Prior::lognormal(p(3), 0.1, (1e4, 1e8)),
            Prior::lognormal(p(4), 0.1, (50.0, 2000.0)),
            Prior::lognormal(p(5), 0.1, (5.0, 200.0)),
            Prior::lognormal(p(6), 0.1, (0.5, 30.0)),
            rel(7, 0.13, 0.0, 100.0),
            rel(8, 0.13, 0.0, 0.2),
            rel(9, 0.13, 0.0, 20.0),
            rel(10, 0.10, 1.0, 8.0),
            Prior::lognormal(p(11), 0.3, (0.01, 2.0)),
            Prior::lognormal(p(12), 0.3, (0.01, 2.0)),
            Prior::lognormal(p(13), 0.25, (30.0, 2000.0)),
            Prior::lognormal(p(14), 0.25, (0.3, 25.0)),
            Prior::normal(1.0, 0.12, (0.0, 3.0)),
            Prior::normal(1.0, 0.12, (0.0, 3.0)),
            Prior::normal(1.0, 0.6, (0.0, 3.0)),
            Prior::normal(1.0, 0.3, (0.0, 3.0)),
            Prior::normal(1.0, 0.3, (0.0, 3.0)),
        ];
        PriorSpec { priors }
    }

    pub fn validate(&self) -> Result<()> {
        if self.priors.len() != N_PARAMS {
            return Err(Error::Config(format!(
                "prior spec has {} entries, expected {N_PARAMS}",
                self.priors.len()
            )));
        }
        for (p, name) in self.priors.iter().zip(PARAM_NAMES) {
            p.validate(name)?;
        }
        Ok(())
    }

    /// Sum of per-parameter log-densities; `-inf` outside any bound or when
    /// the vector violates the model's invariants.
    pub fn log_prior(&self, theta: &ParameterVector) -> f64 {
        if theta.validate().is_err() {
            return f64::NEG_INFINITY;
        }
        self.log_density(&theta.0)
    }

    /// Log-density of a raw vector, without the model-invariant check.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for (p, &v) in self.priors.iter().zip(x) {
            s += p.log_density(v);
            if s == f64::NEG_INFINITY {
                break;
            }
        }
        s
    }

    pub fn mode(&self) -> ParameterVector {
        let mut v = [0.0; N_PARAMS];
        for (o, p) in v.iter_mut().zip(&self.priors) {
            *o = p.mode();
        }
        ParameterVector(v)
    }

    pub fn scales(&self) -> Vec<f64> {
        self.priors.iter().map(Prior::scale).collect()
    }

    /// Draws from the prior restricted to its support and the model invariants.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ParameterVector {
        loop {
            let mut v = [0.0; N_PARAMS];
            for (o, p) in v.iter_mut().zip(&self.priors) {
                *o = loop {
                    let x = p.draw(rng);
                    if p.in_support(x) {
                        break x;
                    }
                };
            }
            let theta = ParameterVector(v);
            if theta.validate().is_ok() {
                return theta;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn uniform_unit_contributes_zero() {
        assert_eq!(Prior::uniform(0.0, 1.0).log_density(0.5), 0.0);
    }

    #[test]
    fn mode_beats_axis_perturbations() {
        let spec = PriorSpec::fair_default();
        let m = spec.mode();
        let lp = spec.log_prior(&m);
        assert!(lp.is_finite());
        for i in 0..N_PARAMS {
            for s in [-0.05, 0.05] {
                let mut t = m;
                t.0[i] += s * spec.priors[i].scale();
                assert!(spec.log_prior(&t) <= lp, "axis {i}");
            }
        }
    }

    #[test]
    fn out_of_bounds_is_neg_infinity() {
        let spec = PriorSpec::fair_default();
        let mut t = spec.mode();
        t.0[17] = -0.1;
        assert_eq!(spec.log_prior(&t), f64::NEG_INFINITY);
        let mut t = spec.mode();
        t.0[0] = 0.5;
        t.0[1] = 0.5; // a4 < 0
        assert_eq!(spec.log_prior(&t), f64::NEG_INFINITY);
    }

    #[test]
    fn samples_are_valid() {
        let spec = PriorSpec::fair_default();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            assert!(spec.log_prior(&spec.sample(&mut rng)).is_finite());
        }
    }

    #[test]
    fn bad_spec_rejected() {
        let mut spec = PriorSpec::fair_default();
        spec.priors[3] = Prior::normal(1.0, -1.0, (0.0, 2.0));
        assert!(spec.validate().is_err());
        spec.priors.pop();
        assert!(spec.validate().is_err());
    }
}
