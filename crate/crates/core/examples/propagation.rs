//! Temperature bands of one scenario under each source of uncertainty:
//! prior parameters, emission error alone, and both together.
//!
//! Usage: cargo run --release --example propagation -- [scenario] [draws]

use tempalign::calibration::PriorSpec;
use tempalign::fair::ParameterVector;
use tempalign::uncertainty::{propagate, EmissionUncertaintySpec, ParameterSource, PropagationConfig};
use tempalign::DataBundle;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let id = args.next().unwrap_or_else(|| "SSP2-RCP4.5".into());
    let n: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(2000);

    let store = DataBundle::locate()?.scenarios()?;
    let s = store.get(&id).ok_or_else(|| format!("unknown scenario {id}"))?;
    let prior = PriorSpec::fair_default();
    let fixed = ParameterSource::Fixed(ParameterVector::fair_default());
    let normal = EmissionUncertaintySpec::normal(0.0, 10.0);
    let lognormal = EmissionUncertaintySpec::lognormal(1.0, 13.0);
    let cfg = PropagationConfig {
        n,
        seed: 3,
        ..Default::default()
    };

    let runs: [(&str, ParameterSource, Option<&EmissionUncertaintySpec>); 5] = [
        ("fixed parameters", fixed, None),
        ("emission normal(0, 10)", fixed, Some(&normal)),
        ("emission lognormal(1, 13)", fixed, Some(&lognormal)),
        ("prior parameters", ParameterSource::Prior(&prior), None),
        (
            "prior + lognormal",
            ParameterSource::Prior(&prior),
            Some(&lognormal),
        ),
    ];
    println!("{id}, {n} draws");
    println!(
        "{:<26} {:>6} {:>7} {:>7} {:>7} {:>7}",
        "source", "year", "mean", "median", "q05", "q95"
    );
    for (label, source, spec) in runs {
        let band = propagate(&s, &source, spec, &cfg)?;
        for year in [2050, 2100] {
            let i = band.index_of(year).ok_or("year not in band")?;
            let (lo, hi) = band.interval(0.9, year).ok_or("no 90% level")?;
            println!(
                "{label:<26} {year:>6} {:>7.3} {:>7.3} {lo:>7.3} {hi:>7.3}",
                band.mean[i], band.median[i]
            );
        }
    }
    Ok(())
}
