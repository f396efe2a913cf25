//! Trains the neural-network emulator on posterior-predictive labels and
//! compares its speed and accuracy with the Monte-Carlo bands.
//!
//! Usage: cargo run --release --example emulator -- [grid points] [draws per point] [output dir]

use std::time::Instant;

use tempalign::calibration::{CalibrationProblem, DramConfig, LikelihoodConfig, PriorSpec};
use tempalign::emulator::{generate_training_set, train, EmulatorModel, GenerationConfig, TrainConfig};
use tempalign::fair::FairConfig;
use tempalign::uncertainty::{ParameterSource, PropagationConfig};
use tempalign::DataBundle;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let n_grid: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(200);
    let n_draws: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(500);
    let out_dir = args.next();

    let bundle = DataBundle::locate()?;
    let store = bundle.scenarios()?;
    let obs = bundle.observations()?;
    let history = store.get("SSP2-RCP4.5").ok_or("missing SSP2-RCP4.5")?;
    let problem = CalibrationProblem::new(
        &history,
        obs.clone(),
        LikelihoodConfig::temperature_only(&obs),
        PriorSpec::fair_default(),
        FairConfig::default(),
    )?;
    let chain = problem.calibrate(
        &DramConfig {
            n_iter: 30_000,
            seed: 1,
            ..Default::default()
        },
        None,
        |_| {},
    )?;

    let ids = store.ids();
    let scenarios: Vec<_> = ids.iter().filter_map(|id| store.get(id)).collect();
    let refs: Vec<&_> = scenarios.iter().map(|s| s.as_ref()).collect();
    let gen = GenerationConfig::grid(
        0.5,
        1.5,
        n_grid,
        2022,
        PropagationConfig {
            n: n_draws,
            seed: 5,
            ..Default::default()
        },
    );
    let t0 = Instant::now();
    let ts = generate_training_set(&ParameterSource::Chain(&chain), &refs, None, &gen)?;
    println!(
        "labels: {} grid points x {} scenarios x {} years from {n_draws} draws in {:.1} s ({} skipped)",
        ts.len(),
        ts.scenarios.len(),
        ts.years.len(),
        t0.elapsed().as_secs_f64(),
        ts.skipped
    );

    let t0 = Instant::now();
    let model = train(&ts, &TrainConfig::default())?;
    let tm = &model.meta.training;
    println!(
        "trained in {:.1} s: holdout RMSE median {:.4} K, quantiles {:.4} K, converged {}",
        t0.elapsed().as_secs_f64(),
        tm.validation_rmse_median.unwrap_or(f64::NAN),
        tm.validation_rmse_quantiles.unwrap_or(f64::NAN),
        tm.converged
    );

    let input = model.input_for_scale(1.0);
    let t0 = Instant::now();
    let p = model.predict(&input)?;
    println!("one prediction in {:.3} ms", t0.elapsed().as_secs_f64() * 1e3);
    for s in &p.scenarios {
        let (mean, med, lo, hi) = s.at(2100).unwrap();
        println!(
            "{:<12} 2100: mean {mean:.3}  median {med:.3}  90% ({lo:.3}, {hi:.3})",
            s.scenario
        );
    }
    if let Some(dir) = out_dir {
        let (bin, json) = model.save(std::path::Path::new(&dir).join("emulator"))?;
        println!("saved {} and {}", bin.display(), json.display());
        let back = EmulatorModel::load(std::path::Path::new(&dir).join("emulator"))?;
        assert_eq!(back.id(), model.id());
    }
    Ok(())
}
