//! Deterministic forward run of every bundled scenario with reference parameters.

use tempalign::fair::{FairConfig, FairModel, ParameterVector};
use tempalign::DataBundle;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let bundle = DataBundle::locate()?;
    let store = bundle.scenarios()?;
    let params = ParameterVector::fair_default();

    println!(
        "{:<12} {:>8} {:>8} {:>8} {:>9}",
        "scenario", "T2020", "T2050", "T2100", "CO2 2100"
    );
    for id in store.ids() {
        let scenario = store.get(&id).unwrap();
        let model = FairModel::new(FairConfig::default(), scenario.pathway.schema().clone())?;
        let out = model.run_scenario(&scenario, &params)?;
        println!(
            "{:<12} {:>8.3} {:>8.3} {:>8.3} {:>9.1}",
            id,
            out.at(2020).unwrap(),
            out.at(2050).unwrap(),
            out.at(2100).unwrap(),
            out.co2_ppm.last().unwrap()
        );
    }
    Ok(())
}
