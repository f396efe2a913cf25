//! Calibrates the climate parameters against the bundled historical record
//! with DRAM, then compares prior and posterior 2050 bands under SSP5-RCP8.5.
//!
//! Usage: cargo run --release --example calibrate -- [iterations] [seed]

use std::time::Instant;

use tempalign::calibration::{diagnostics, CalibrationProblem, DramConfig, LikelihoodConfig, PriorSpec};
use tempalign::fair::FairConfig;
use tempalign::uncertainty::{propagate, ParameterSource, PropagationConfig};
use tempalign::DataBundle;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let n_iter: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(20_000);
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(1);

    let bundle = DataBundle::locate()?;
    let store = bundle.scenarios()?;
    let obs = bundle.observations()?;
    let history = store.get("SSP2-RCP4.5").ok_or("missing SSP2-RCP4.5")?;
    let prior = PriorSpec::fair_default();
    let problem = CalibrationProblem::new(
        &history,
        obs.clone(),
        LikelihoodConfig::temperature_only(&obs),
        prior.clone(),
        FairConfig::default(),
    )?;

    let t0 = Instant::now();
    let cfg = DramConfig {
        n_iter,
        seed,
        ..Default::default()
    };
    let chain = problem.calibrate(&cfg, None, |_| {})?;
    let elapsed = t0.elapsed();
    let report = diagnostics(&chain);
    println!(
        "{n_iter} iterations in {:.1} s ({:.0} us/iter), acceptance {:.3} (stage 2 {:.3}), forward failures {}",
        elapsed.as_secs_f64(),
        elapsed.as_secs_f64() * 1e6 / n_iter as f64,
        report.acceptance_rate,
        report.stage2_acceptance,
        problem.failures()
    );
    println!(
        "{:<14} {:>10} {:>10} {:>10} {:>8} {:>7}",
        "parameter", "q05", "median", "q95", "IAT", "Rhat"
    );
    for p in &report.parameters {
        println!(
            "{:<14} {:>10.4} {:>10.4} {:>10.4} {:>8.1} {:>7.3}",
            p.name, p.q05, p.median, p.q95, p.iat, p.split_rhat
        );
    }
    if report.non_stationary {
        println!("warning: chain flagged non-stationary; consider more iterations");
    }

    let ssp5 = store.get("SSP5-RCP8.5").ok_or("missing SSP5-RCP8.5")?;
    let pcfg = PropagationConfig {
        n: 2000,
        seed,
        ..Default::default()
    };
    let post = propagate(&ssp5, &ParameterSource::Chain(&chain), None, &pcfg)?;
    let pri = propagate(&ssp5, &ParameterSource::Prior(&prior), None, &pcfg)?;
    let (a, b) = post.interval(0.9, 2050).unwrap();
    let (c, d) = pri.interval(0.9, 2050).unwrap();
    println!("SSP5-RCP8.5 2050, 90% band: posterior ({a:.3}, {b:.3})  prior ({c:.3}, {d:.3})");
    println!("width ratio posterior/prior: {:.3}", (b - a) / (d - c));
    Ok(())
}
