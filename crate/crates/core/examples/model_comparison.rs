//! Posterior probabilities of two structural variants of the climate model,
//! differing only in when within a year emissions enter the atmosphere.
//!
//! Usage: cargo run --release --example model_comparison -- [iterations]

use tempalign::calibration::{
    model_posterior, CalibrationProblem, DramConfig, EvidenceConfig, EvidenceModel, LikelihoodConfig,
    PriorSpec,
};
use tempalign::fair::{FairConfig, ParameterVector, Timing};
use tempalign::DataBundle;

type LogJoint<'a> = dyn Fn(&[f64]) -> f64 + Sync + 'a;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n_iter: usize = std::env::args()
        .nth(1)
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(20_000);
    let bundle = DataBundle::locate()?;
    let store = bundle.scenarios()?;
    let obs = bundle.observations()?;
    let history = store.get("SSP2-RCP4.5").ok_or("missing SSP2-RCP4.5")?;

    let mut problems = Vec::new();
    for timing in [Timing::Uniform, Timing::EndOfYear] {
        let fair = FairConfig {
            timing,
            ..Default::default()
        };
        let p = CalibrationProblem::new(
            &history,
            obs.clone(),
            LikelihoodConfig::temperature_only(&obs),
            PriorSpec::fair_default(),
            fair,
        )?;
        problems.push((format!("{timing:?}"), p));
    }

    let mut chains = Vec::new();
    for (name, p) in &problems {
        let chain = p.calibrate(
            &DramConfig {
                n_iter,
                seed: 4,
                ..Default::default()
            },
            None,
            |_| {},
        )?;
        println!("{name}: acceptance {:.3}", chain.acceptance_rate);
        chains.push(chain);
    }

    let joints: Vec<Box<LogJoint<'_>>> = problems
        .iter()
        .map(|(_, p)| {
            Box::new(move |x: &[f64]| match ParameterVector::from_slice(x) {
                Ok(t) => p.log_posterior(&t),
                Err(_) => f64::NEG_INFINITY,
            }) as Box<LogJoint<'_>>
        })
        .collect();
    let models: Vec<EvidenceModel> = problems
        .iter()
        .zip(&chains)
        .zip(&joints)
        .map(|(((name, _), chain), f)| EvidenceModel {
            name: name.clone(),
            log_joint: f.as_ref(),
            chain,
        })
        .collect();
    let cmp = model_posterior(&models, &[0.5, 0.5], &EvidenceConfig::default())?;
    for ((name, lz), p) in cmp.names.iter().zip(&cmp.log_evidence).zip(&cmp.probabilities) {
        println!("{name:<10} log evidence {lz:>10.2}  posterior probability {p:.3}");
    }
    Ok(())
}
