use std::collections::BTreeMap;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const N_PARAMS: usize = 20;

/// Names of the calibratable entries, in vector order.
pub const PARAM_NAMES: [&str; N_PARAMS] = [
    "a1",
    "a2",
    "a3",
    "tau1",
    "tau2",
    "tau3",
    "tau4",
    "r0",
    "rc",
    "rt",
    "f2x",
    "q1",
    "q2",
    "d1",
    "d2",
    "scale_ch4",
    "scale_n2o",
    "scale_aerosol",
    "scale_ozone",
    "scale_other",
];

pub mod idx {
    pub const A1: usize = 0;
    pub const TAU1: usize = 3;
    pub const R0: usize = 7;
    pub const RC: usize = 8;
    pub const RT: usize = 9;
    pub const F2X: usize = 10;
    pub const Q1: usize = 11;
    pub const Q2: usize = 12;
    pub const D1: usize = 13;
    pub const D2: usize = 14;
    pub const SCALE_CH4: usize = 15;
    pub const SCALE_N2O: usize = 16;
    pub const SCALE_AEROSOL: usize = 17;
    pub const SCALE_OZONE: usize = 18;
    pub const SCALE_OTHER: usize = 19;
}

/// The 20 calibratable climate-model parameters.
///
/// Only three reservoir fractions are stored; the fourth is `1 - a1 - a2 - a3`,
/// so the fractions sum to one by construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParameterVector(pub [f64; N_PARAMS]);

impl Default for ParameterVector {
    fn default() -> Self {
        Self::fair_default()
    }
}

impl ParameterVector {
    /// Reference values of the carbon-cycle and thermal response; unit scale factors.
    pub fn fair_default() -> Self {
        ParameterVector([
            0.2173, 0.2240, 0.2824, // a1..a3
            1.0e6, 394.4, 36.54, 4.304, // tau1..tau4
            35.0, 0.019, 4.165, // r0, rc, rt
            3.71,  // f2x
            0.33, 0.41, 239.0, 4.1, // q1, q2, d1, d2
            1.0, 1.0, 1.0, 1.0, 1.0,
        ])
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        let arr: [f64; N_PARAMS] = v.try_into().map_err(|_| {
            Error::Config(format!(
                "parameter vector needs {N_PARAMS} entries, got {}",
                v.len()
            ))
        })?;
        Ok(ParameterVector(arr))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        PARAM_NAMES.iter().position(|n| *n == name).map(|i| self.0[i])
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        let i = PARAM_NAMES
            .iter()
            .position(|n| *n == name)
            .ok_or_else(|| Error::Config(format!("unknown parameter '{name}'")))?;
        self.0[i] = value;
        Ok(())
    }

    pub fn a(&self) -> [f64; 4] {
        let [a1, a2, a3] = [self.0[0], self.0[1], self.0[2]];
        [a1, a2, a3, 1.0 - a1 - a2 - a3]
    }

    pub fn tau(&self) -> [f64; 4] {
        [self.0[3], self.0[4], self.0[5], self.0[6]]
    }

    pub fn r0(&self) -> f64 {
        self.0[idx::R0]
    }
    pub fn rc(&self) -> f64 {
        self.0[idx::RC]
    }
    pub fn rt(&self) -> f64 {
        self.0[idx::RT]
    }
    pub fn f2x(&self) -> f64 {
        self.0[idx::F2X]
    }
    pub fn q(&self) -> [f64; 2] {
        [self.0[idx::Q1], self.0[idx::Q2]]
    }
    pub fn d(&self) -> [f64; 2] {
        [self.0[idx::D1], self.0[idx::D2]]
    }

    /// Equilibrium warming for a doubling of CO2, K.
    pub fn ecs(&self) -> f64 {
        (self.0[idx::Q1] + self.0[idx::Q2]) * self.f2x()
    }

    /// Checks the physical invariants: fractions in (0, 1) summing to one,
    /// positive lifetimes, amplitudes and forcing, distinct thermal timescales.
    pub fn validate(&self) -> Result<()> {
        if let Some(i) = self.0.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!(
                "parameter '{}' is not finite",
                PARAM_NAMES[i]
            )));
        }
        let a = self.a();
        if a.iter().any(|&x| x <= 0.0 || x >= 1.0) {
            return Err(Error::Domain(format!(
                "reservoir fractions {a:?} must lie in (0, 1)"
            )));
        }
        if self.tau().iter().any(|&t| t <= 0.0) {
            return Err(Error::Domain("reservoir lifetimes must be positive".into()));
        }
        let [q1, q2] = self.q();
        let [d1, d2] = self.d();
        if q1 <= 0.0 || q2 <= 0.0 || d1 <= 0.0 || d2 <= 0.0 || self.f2x() <= 0.0 {
            return Err(Error::Domain("q, d and f2x must be positive".into()));
        }
        if d1 == d2 {
            return Err(Error::Domain("thermal timescales d1 and d2 must differ".into()));
        }
        Ok(())
    }

    pub fn named(&self) -> BTreeMap<&'static str, f64> {
        PARAM_NAMES.iter().copied().zip(self.0).collect()
    }
}

#[derive(Serialize, Deserialize)]
struct Wire {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    named: Option<BTreeMap<String, f64>>,
}

impl Serialize for ParameterVector {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        Wire {
            values: Some(self.0.to_vec()),
            named: Some(
                self.named()
                    .into_iter()
                    .map(|(k, v)| (k.to_string(), v))
                    .collect(),
            ),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ParameterVector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let w = Wire::deserialize(d)?;
        if let Some(v) = w.values {
            return ParameterVector::from_slice(&v).map_err(D::Error::custom);
        }
        if let Some(m) = w.named {
            let mut p = ParameterVector::fair_default();
            for (k, v) in m {
                p.set(&k, v).map_err(D::Error::custom)?;
            }
            return Ok(p);
        }
        Err(D::Error::custom("parameter vector needs 'values' or 'named'"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid_and_fractions_close() {
        let p = ParameterVector::fair_default();
        p.validate().unwrap();
        assert!((p.a().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((p.a()[3] - 0.2763).abs() < 1e-12);
    }

    #[test]
    fn equal_timescales_rejected() {
        let mut p = ParameterVector::fair_default();
        p.0[idx::D2] = p.0[idx::D1];
        assert!(p.validate().is_err());
    }

    #[test]
    fn json_round_trip_and_named_only() {
        let p = ParameterVector::fair_default();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(serde_json::from_str::<ParameterVector>(&s).unwrap(), p);
        let q: ParameterVector = serde_json::from_str(r#"{"named":{"f2x":4.0}}"#).unwrap();
        assert_eq!(q.f2x(), 4.0);
        assert!(serde_json::from_str::<ParameterVector>(r#"{"values":[1,2]}"#).is_err());
    }
}
