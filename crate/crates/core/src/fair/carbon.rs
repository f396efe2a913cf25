//! Carbon cycle: four decaying reservoirs whose lifetimes are stretched by a
//! state-dependent factor alpha.

use crate::error::{Error, Result};

use super::{FairConfig, ParameterVector};

/// 100-year integrated impulse response of the reservoirs scaled by `alpha`, years.
pub fn iirf(alpha: f64, a: &[f64; 4], tau: &[f64; 4], horizon: f64) -> f64 {
    (0..4)
        .map(|i| {
            let t = alpha * tau[i];
            a[i] * t * -(-horizon / t).exp_m1()
        })
        .sum()
}

/// d iIRF / d alpha.
fn iirf_slope(alpha: f64, a: &[f64; 4], tau: &[f64; 4], horizon: f64) -> f64 {
    (0..4)
        .map(|i| {
            let t = alpha * tau[i];
            let e = (-horizon / t).exp();
            a[i] * tau[i] * (1.0 - e - horizon / t * e)
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaSolution {
    pub alpha: f64,
    /// The target was outside what `[alpha_min, alpha_max]` or `iirf_max` can represent.
    pub clamped: bool,
}

/// Target iIRF100 for a given carbon-sink uptake (GtC) and temperature (K).
pub fn iirf_target(cumulative_uptake: f64, temperature: f64, params: &ParameterVector) -> f64 {
    params.r0() + params.rc() * cumulative_uptake + params.rt() * temperature
}

/// Finds alpha with `iirf(alpha) = r0 + rC * uptake + rT * T`.
///
/// The target is capped at `cfg.iirf_max`. The root is bracketed in
/// `[alpha_min, alpha_max]` and refined with Newton steps, falling back to
/// bisection (in log alpha) whenever a step leaves the bracket. `guess` warm-starts
/// the iteration; it does not change the result beyond solver tolerance.
pub fn solve_alpha(
    cumulative_uptake: f64,
    temperature: f64,
    params: &ParameterVector,
    cfg: &FairConfig,
    guess: Option<f64>,
) -> Result<AlphaSolution> {
    if !cumulative_uptake.is_finite() || !temperature.is_finite() {
        return Err(Error::Domain(format!(
            "alpha solve needs finite inputs (uptake {cumulative_uptake}, T {temperature})"
        )));
    }
    let a = params.a();
    let tau = params.tau();
    let h = cfg.iirf_horizon;
    let mut target = iirf_target(cumulative_uptake, temperature, params);
    let mut clamped = false;
    if target > cfg.iirf_max {
        target = cfg.iirf_max;
        clamped = true;
    }
    let (mut lo, mut hi) = (cfg.alpha_min, cfg.alpha_max);
    let f = |x: f64| iirf(x, &a, &tau, h) - target;
    if f(lo) >= 0.0 {
        return Ok(AlphaSolution {
            alpha: lo,
            clamped: true,
        });
    }
    if f(hi) <= 0.0 {
        return Ok(AlphaSolution {
            alpha: hi,
            clamped: true,
        });
    }

    let mut x = guess.filter(|g| *g > lo && *g < hi).unwrap_or(1.0).clamp(lo, hi);
    for _ in 0..200 {
        let fx = f(x);
        if fx.abs() < cfg.alpha_tol {
            return Ok(AlphaSolution { alpha: x, clamped });
        }
        if fx > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let slope = iirf_slope(x, &a, &tau, h);
        let newton = x - fx / slope;
        x = if slope > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            (lo * hi).sqrt()
        };
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    let fx = f(x);
    if fx.abs() < cfg.alpha_tol {
        Ok(AlphaSolution { alpha: x, clamped })
    } else {
        Err(Error::Domain(format!(
            "alpha solve did not converge (residual {fx:e})"
        )))
    }
}
