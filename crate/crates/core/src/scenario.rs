//! Scenario files: the full problem statement (V, W, J, ε list, solver
//! overrides) in JSON, plus the two built-in scenarios used throughout.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potentials::{PerturbationSpec, PeriodicPotential};

#[derive(Debug, Clone, Serialize, Deserialize, Default, PartialEq)]
pub struct SolverOverrides {
    /// Half-length of the truncated interval.
    #[serde(default)]
    pub half_length: Option<f64>,
    /// Grid points per unit period (h = 1/m).
    #[serde(default)]
    pub points_per_period: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Scenario {
    #[serde(rename = "V")]
    pub v: PeriodicPotential,
    #[serde(rename = "W")]
    pub w: PerturbationSpec,
    #[serde(rename = "J")]
    pub j: (f64, f64),
    pub epsilons: Vec<f64>,
    #[serde(default = "default_phi_samples")]
    pub phi_samples: usize,
    /// Strip half-width Y; default derives from the pole locations of W.
    #[serde(rename = "Y", default)]
    pub strip: Option<f64>,
    /// Band-structure search ceiling.
    #[serde(default)]
    pub band_e_max: Option<f64>,
    #[serde(default)]
    pub solver: SolverOverrides,
    /// Support of the trace-check bump; default is J shrunk by 20% per side.
    #[serde(default)]
    pub trace_bump: Option<(f64, f64)>,
}

fn default_phi_samples() -> usize {
    16
}

impl Scenario {
    /// The worked example: V = 2cos(2πx) (wide open first gap),
    /// W = -9/(1+x²), J in the semi-infinite gap below the first band,
    /// sized by the max/min window that keeps exactly one band visible.
    pub fn default_example() -> Self {
        Scenario {
            v: PeriodicPotential::cosine(1, 2.0),
            w: PerturbationSpec::LorentzianWell { alpha: 9.0 },
            j: (-1.4, -0.7),
            epsilons: vec![0.05, 0.03, 0.02],
            phi_samples: 16,
            strip: Some(0.42),
            band_e_max: None,
            solver: SolverOverrides::default(),
            trace_bump: Some((-1.3, -0.8)),
        }
    }

    /// Shallow-well scenario probing the harmonic regime at the bottom of
    /// the effective well (collapsed-cross edge asymptotics): α = 1, J
    /// hugging E_1 - α, ε swept down to 0.005. Actions-only workloads.
    pub fn edge_example() -> Self {
        Scenario {
            v: PeriodicPotential::cosine(1, 2.0),
            w: PerturbationSpec::LorentzianWell { alpha: 1.0 },
            j: (-1.0496, -0.75),
            epsilons: vec![0.02, 0.01, 0.005],
            phi_samples: 16,
            strip: Some(0.952),
            band_e_max: None,
            solver: SolverOverrides::default(),
            trace_bump: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.j.1 > self.j.0) {
            return Err(Error::Config(format!(
                "J = [{}, {}] is empty",
                self.j.0, self.j.1
            )));
        }
        if self.epsilons.is_empty() || self.epsilons.iter().any(|&e| e <= 0.0) {
            return Err(Error::Config("epsilons must be positive".into()));
        }
        if self.phi_samples < 8 {
            return Err(Error::Config("phi_samples must be at least 8".into()));
        }
        if let Some((lo, hi)) = self.trace_bump {
            if !(lo < hi && lo >= self.j.0 && hi <= self.j.1) {
                return Err(Error::Config(
                    "trace_bump support must lie strictly inside J".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn band_e_max(&self) -> f64 {
        self.band_e_max.unwrap_or(45.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_spec_fragment() {
        let text = r#"{
            "V": {"series": [{"n": 1, "a": 2.0}]},
            "W": {"kind": "lorentzian_well", "alpha": 0.5},
            "J": [-1.0, -0.5],
            "epsilons": [0.05]
        }"#;
        let s = Scenario::from_json(text).unwrap();
        assert_eq!(s.v, PeriodicPotential::cosine(1, 2.0));
        assert_eq!(s.w, PerturbationSpec::LorentzianWell { alpha: 0.5 });
        assert_eq!(s.phi_samples, 16);
        let back = serde_json::to_string(&s).unwrap();
        let s2 = Scenario::from_json(&back).unwrap();
        assert_eq!(s, s2);
    }

    #[test]
    fn rejects_bad_scenarios() {
        let mut s = Scenario::default_example();
        s.j = (0.5, 0.5);
        assert!(s.validate().is_err());
        let mut s = Scenario::default_example();
        s.epsilons = vec![-0.1];
        assert!(s.validate().is_err());
        let mut s = Scenario::default_example();
        s.trace_bump = Some((-2.0, -0.8));
        assert!(s.validate().is_err());
    }
}
