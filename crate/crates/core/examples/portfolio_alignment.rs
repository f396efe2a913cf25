//! Implied temperature of the SSAB portfolio, today and with green steel,
//! against the STOXX Europe 600 iron-and-steel benchmark.
//!
//! Calibrates a chain first (iterations from the first argument), then prints
//! the mean 2100 temperature for the unmodified scenario, the portfolio and
//! the green-steel variant, with parameter draws from the chain and a
//! lognormal emission error (median 1%, SD 13%) applied together.
//!
//! Usage: cargo run --release --example portfolio_alignment -- [iterations] [scopes, e.g. 12]

use tempalign::calibration::{CalibrationProblem, DramConfig, LikelihoodConfig, PriorSpec};
use tempalign::fair::FairConfig;
use tempalign::socioecon::{
    baseline_temperature, implied_temperature, sector_adjustments, BenchmarkEnsemble, Portfolio, ScopeMask,
};
use tempalign::uncertainty::{EmissionUncertaintySpec, ParameterSource, PropagationConfig};
use tempalign::DataBundle;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let n_iter: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(50_000);
    let scopes: Vec<u8> = args
        .next()
        .unwrap_or_else(|| "12".into())
        .bytes()
        .map(|b| b - b'0')
        .collect();
    let mask = ScopeMask::new(&scopes)?;

    let bundle = DataBundle::locate()?;
    let store = bundle.scenarios()?;
    let shares = bundle.sector_shares()?;
    let ssab = Portfolio::load(bundle.portfolio_path("ssab"))?;
    let green = Portfolio::load(bundle.portfolio_path("ssab_green"))?;
    let bench = BenchmarkEnsemble::load(bundle.portfolio_path("stoxx600_iron_steel_2022"))?;

    for (label, p) in [("SSAB", &ssab), ("green steel", &green)] {
        for a in sector_adjustments(p, &bench, &shares, mask)? {
            println!(
                "{label:<12} {}: EEI {:.1} vs benchmark {:.1} t/Mn USD (ratio {:.4}, share {:.4})",
                a.sector, a.portfolio_eei, a.benchmark_eei, a.ratio, a.share
            );
        }
    }

    let obs = bundle.observations()?;
    let history = store.get("SSP2-RCP4.5").ok_or("missing SSP2-RCP4.5")?;
    let problem = CalibrationProblem::new(
        &history,
        obs.clone(),
        LikelihoodConfig::temperature_only(&obs),
        PriorSpec::fair_default(),
        FairConfig::default(),
    )?;
    let cfg = DramConfig {
        n_iter,
        seed: 7,
        ..Default::default()
    };
    let chain = problem.calibrate(&cfg, None, |_| {})?;
    println!(
        "calibrated {n_iter} iterations, acceptance {:.3}",
        chain.acceptance_rate
    );

    let source = ParameterSource::Chain(&chain);
    let spec = EmissionUncertaintySpec::lognormal(1.0, 13.0);
    let uq = Some(&spec);
    let pcfg = PropagationConfig {
        n: 2000,
        seed: 11,
        ..Default::default()
    };
    println!(
        "{:<12} {:>9} {:>9} {:>9} {:>9}",
        "scenario", "baseline", "SSAB", "green", "b-g"
    );
    for id in ["SSP1-RCP2.6", "SSP2-RCP4.5", "SSP5-RCP8.5"] {
        let s = store.get(id).ok_or("missing scenario")?;
        let base = baseline_temperature(&s, &source, uq, &pcfg)?;
        let cur = implied_temperature(&ssab, &bench, &s, &shares, mask, &source, uq, &pcfg)?;
        let grn = implied_temperature(&green, &bench, &s, &shares, mask, &source, uq, &pcfg)?;
        let t = |a: &tempalign::socioecon::Alignment| a.summary(2100).map(|x| x.mean).unwrap_or(f64::NAN);
        println!(
            "{id:<12} {:>9.3} {:>9.3} {:>9.3} {:>9.3}",
            t(&base),
            t(&cur),
            t(&grn),
            t(&base) - t(&grn)
        );
    }
    Ok(())
}
