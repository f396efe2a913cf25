use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::chain::PosteriorChain;

/// Sokal windowing constant: the sum is truncated at the first lag `M >= C * tau(M)`.
const SOKAL_C: f64 = 5.0;
const RHAT_LIMIT: f64 = 1.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
    pub q05: f64,
    pub median: f64,
    pub q95: f64,
    /// Integrated autocorrelation time, iterations.
    pub iat: f64,
    pub ess: f64,
    /// Split-chain potential scale reduction.
    pub split_rhat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainReport {
    pub acceptance_rate: f64,
    pub stage1_acceptance: f64,
    pub stage2_acceptance: f64,
    pub n_retained: usize,
    pub burn_in: usize,
    pub parameters: Vec<ParameterSummary>,
    /// Some parameter never moved.
    pub degenerate: bool,
    /// Some parameter has split R-hat above 1.1 (or is degenerate).
    pub non_stationary: bool,
}

/// Normalized autocorrelation function, computed via zero-padded FFT.
pub fn autocorrelation(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let m = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = x
        .iter()
        .map(|v| Complex::new(v - mean, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(m)
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(m).process(&mut buf);
    buf.iter_mut().for_each(|c| *c = Complex::new(c.norm_sqr(), 0.0));
    planner.plan_fft_inverse(m).process(&mut buf);
    let c0 = buf[0].re;
    if c0 <= 0.0 {
        return vec![f64::NAN; n];
    }
    buf[..n].iter().map(|c| c.re / c0).collect()
}

/// Integrated autocorrelation time `1 + 2 sum rho(t)` with Sokal's automatic window.
/// Returns NaN for a constant series.
pub fn integrated_autocorrelation_time(x: &[f64]) -> f64 {
    let rho = autocorrelation(x);
    if rho.first().is_none_or(|r| r.is_nan()) {
        return f64::NAN;
    }
    let mut tau = 1.0;
    for (m, r) in rho.iter().enumerate().skip(1) {
        tau += 2.0 * r;
        if m as f64 >= SOKAL_C * tau {
            break;
        }
    }
    tau.max(1.0 / x.len() as f64)
}

/// Gelman-Rubin statistic on the two halves of the series.
pub fn split_rhat(x: &[f64]) -> f64 {
    let h = x.len() / 2;
    if h < 2 {
        return f64::NAN;
    }
    let halves = [&x[..h], &x[h..2 * h]];
    let stats: Vec<(f64, f64)> = halves
        .iter()
        .map(|c| {
            let m = c.iter().sum::<f64>() / h as f64;
            let v = c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (h as f64 - 1.0);
            (m, v)
        })
        .collect();
    let w = (stats[0].1 + stats[1].1) / 2.0;
    let grand = (stats[0].0 + stats[1].0) / 2.0;
    let b = h as f64 * stats.iter().map(|(m, _)| (m - grand).powi(2)).sum::<f64>();
    if w <= 0.0 {
        return if b > 0.0 { f64::INFINITY } else { f64::NAN };
    }
    let var_plus = (h as f64 - 1.0) / h as f64 * w + b / h as f64;
    (var_plus / w).sqrt()
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    crate::uncertainty::quantile_sorted(sorted, p)
}

/// Acceptance, per-parameter summaries, autocorrelation time and split R-hat.
pub fn diagnostics(chain: &PosteriorChain) -> ChainReport {
    let n = chain.n_retained();
    let parameters: Vec<ParameterSummary> = (0..chain.dim)
        .map(|j| {
            let col = chain.retained_column(j);
            let mean = col.iter().sum::<f64>() / n as f64;
            let sd = if n > 1 {
                (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt()
            } else {
                0.0
            };
            let mut sorted = col.clone();
            sorted.sort_by(f64::total_cmp);
            let iat = integrated_autocorrelation_time(&col);
            ParameterSummary {
                name: chain.names.get(j).cloned().unwrap_or_else(|| format!("x{j}")),
                mean,
                sd,
                min: sorted[0],
                max: sorted[n - 1],
                q05: quantile(&sorted, 0.05),
                median: quantile(&sorted, 0.5),
                q95: quantile(&sorted, 0.95),
                iat,
                ess: n as f64 / iat,
                split_rhat: split_rhat(&col),
            }
        })
        .collect();
    let degenerate = parameters.iter().any(|p| p.sd == 0.0);
    let non_stationary = degenerate || parameters.iter().any(|p| !(p.split_rhat <= RHAT_LIMIT));
    ChainReport {
        acceptance_rate: chain.acceptance_rate,
        stage1_acceptance: chain.stage1_acceptance,
        stage2_acceptance: chain.stage2_acceptance,
        n_retained: n,
        burn_in: chain.burn_in,
        parameters,
        degenerate,
        non_stationary,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn white_noise_has_unit_iat() {
        let tau = integrated_autocorrelation_time(&noise(50_000, 1));
        assert!((tau - 1.0).abs() < 0.1, "{tau}");
    }

    #[test]
    fn ar1_matches_closed_form() {
        let rho = 0.9;
        let e = noise(200_000, 2);
        let mut x = vec![0.0; e.len()];
        for i in 1..x.len() {
            x[i] = rho * x[i - 1] + e[i];
        }
        let tau = integrated_autocorrelation_time(&x);
        let exact = (1.0 + rho) / (1.0 - rho);
        assert!((tau - exact).abs() / exact < 0.2, "{tau}");
    }

    #[test]
    fn autocorrelation_of_alternating_series() {
        let x: Vec<f64> = (0..64).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let r = autocorrelation(&x);
        assert!((r[1] + 63.0 / 64.0).abs() < 1e-12);
    }

    #[test]
    fn constant_chain_flagged() {
        let rows = vec![vec![1.0, 2.0]; 100];
        let ch = PosteriorChain::from_rows(&rows, None).unwrap();
        let r = diagnostics(&ch);
        assert!(r.degenerate && r.non_stationary);
    }

    #[test]
    fn drifting_chain_flagged_non_stationary() {
        let rows: Vec<Vec<f64>> = (0..1000).map(|i| vec![i as f64 * 0.01]).collect();
        let r = diagnostics(&PosteriorChain::from_rows(&rows, None).unwrap());
        assert!(!r.degenerate && r.non_stationary);
        let rows: Vec<Vec<f64>> = noise(1000, 4).into_iter().map(|v| vec![v]).collect();
        assert!(!diagnostics(&PosteriorChain::from_rows(&rows, None).unwrap()).non_stationary);
    }
}
