//! Annual-step simple climate model: emissions to concentrations, forcing and temperature.
//!
//! CO2 enters four reservoirs obeying `dR_i/dt = a_i E - R_i / (alpha tau_i)`.
//! Alpha is chosen each year so that the 100-year integrated impulse response
//! matches `r0 + rC * uptake + rT * T`. Concentration is preindustrial plus the
//! reservoir total, forcing is logarithmic in CO2, and temperature is the sum
//! of two boxes relaxing towards `q_j F` on timescales `d_j`. Non-CO2 gases
//! decay with a single lifetime; short-lived species force through their
//! emission anomaly. Each non-CO2 category carries a calibratable scale factor.

mod carbon;
pub mod forcing;
mod model;
mod params;

pub use carbon::{iirf, iirf_target, solve_alpha, AlphaSolution};
pub use model::{
    run, thermal_response, AlphaMode, ClimateState, FairConfig, FairModel, Forcing, ForcingSeries,
    StepOutput, TemperaturePathway, Timing, N_CONC_GASES,
};
pub use params::{idx, ParameterVector, N_PARAMS, PARAM_NAMES};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gases::GasSchema;
    use crate::scenario::EmissionPathway;

    fn co2_model(cfg: FairConfig) -> FairModel {
        FairModel::new(cfg, GasSchema::co2e()).unwrap()
    }

    fn pathway(first: i32, values: Vec<f64>) -> EmissionPathway {
        let years = (first..first + values.len() as i32).collect();
        EmissionPathway::new(GasSchema::co2e(), years, values).unwrap()
    }

    #[test]
    fn zero_emissions_fixed_point() {
        let m = co2_model(FairConfig::default());
        let p = pathway(1800, vec![0.0; 300]);
        let out = m
            .run(
                &p,
                &ParameterVector::default(),
                &[0.0; 300],
                &ClimateState::zero(1799),
            )
            .unwrap();
        assert!(out.temperature.iter().all(|&t| t == 0.0));
        assert!(out.co2_ppm.iter().all(|&c| c == 278.0));
    }

    #[test]
    fn multigas_zero_fixed_point_at_reference() {
        let m = FairModel::new(FairConfig::default(), GasSchema::multigas()).unwrap();
        let n = 50;
        let row: Vec<f64> = (0..39)
            .map(|i| if i < 2 { 0.0 } else { 1.0 + i as f64 })
            .collect();
        let data: Vec<f64> = (0..n).flat_map(|_| row.clone()).collect();
        let p = EmissionPathway::new(GasSchema::multigas(), (1900..1900 + n as i32).collect(), data).unwrap();
        let out = m
            .run(
                &p,
                &ParameterVector::default(),
                &vec![0.0; n],
                &ClimateState::zero(1899),
            )
            .unwrap();
        assert!(out.temperature.iter().all(|&t| t == 0.0));
    }

    #[test]
    fn pulse_decay_end_of_year() {
        let cfg = FairConfig {
            alpha: AlphaMode::Fixed(1.0),
            timing: Timing::EndOfYear,
            ..Default::default()
        };
        let m = co2_model(cfg);
        let params = ParameterVector::default();
        let mut state = ClimateState::zero(1999);
        let (s, _) = m.step(&state, &[10.0], 0.0, &params).unwrap();
        state = s;
        for dt in 1..=60 {
            let (s, _) = m.step(&state, &[0.0], 0.0, &params).unwrap();
            state = s;
            for i in 0..4 {
                let exact = 10.0 * params.a()[i] * (-(dt as f64) / params.tau()[i]).exp();
                assert!((state.reservoirs[i] - exact).abs() <= 1e-9 * exact.abs().max(1e-300));
            }
        }
    }

    #[test]
    fn iirf_monotone_and_alpha_grows_with_uptake() {
        let p = ParameterVector::default();
        let cfg = FairConfig::default();
        let a0 = solve_alpha(0.0, 0.0, &p, &cfg, None).unwrap().alpha;
        let a1 = solve_alpha(500.0, 1.0, &p, &cfg, None).unwrap().alpha;
        assert!(a1 > a0);
    }

    #[test]
    fn run_rejects_misaligned_initial_state() {
        let m = co2_model(FairConfig::default());
        let p = pathway(2000, vec![1.0; 3]);
        assert!(m
            .run(
                &p,
                &ParameterVector::default(),
                &[0.0; 3],
                &ClimateState::zero(2000)
            )
            .is_err());
    }

    #[test]
    fn massive_removal_is_domain_error() {
        let m = co2_model(FairConfig::default());
        let p = pathway(2000, vec![-99.0; 30]);
        let r = m.run(
            &p,
            &ParameterVector::default(),
            &[0.0; 30],
            &ClimateState::zero(1999),
        );
        assert!(matches!(r, Err(crate::Error::Domain(_))));
    }
}
