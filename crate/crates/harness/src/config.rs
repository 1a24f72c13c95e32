//! Experiment configuration with per-experiment presets. Every field is always present in
//! a resolved configuration, so reports echo the complete set of parameters.

use serde::{Deserialize, Serialize};

use gibbsdyn::flow::FlowConfig;
use gibbsdyn::gibbs::{GibbsConfig, Observable, SamplerMethod};
use gibbsdyn::{Error, GridSpec, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Exact linear-stochastic steps against the stationary law and an Euler–Maruyama oracle.
    Ou,
    Invariance,
    Ergodicity,
    Linear,
    Decay,
    Nstability,
    Coupling,
    /// Splitting error against the Picard oracle on a fixed noise path.
    Order,
    Energy,
    Xalpha,
    Control,
    Girsanov,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 12] = [
        ExperimentKind::Ou,
        ExperimentKind::Invariance,
        ExperimentKind::Ergodicity,
        ExperimentKind::Linear,
        ExperimentKind::Decay,
        ExperimentKind::Nstability,
        ExperimentKind::Coupling,
        ExperimentKind::Order,
        ExperimentKind::Energy,
        ExperimentKind::Xalpha,
        ExperimentKind::Control,
        ExperimentKind::Girsanov,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Ou => "ou",
            ExperimentKind::Invariance => "invariance",
            ExperimentKind::Ergodicity => "ergodicity",
            ExperimentKind::Linear => "linear",
            ExperimentKind::Decay => "decay",
            ExperimentKind::Nstability => "nstability",
            ExperimentKind::Coupling => "coupling",
            ExperimentKind::Order => "order",
            ExperimentKind::Energy => "energy",
            ExperimentKind::Xalpha => "xalpha",
            ExperimentKind::Control => "control",
            ExperimentKind::Girsanov => "girsanov",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub dim: usize,
    pub points: usize,
    pub dispersion: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSection {
    pub truncation: i64,
    pub gamma: f64,
    pub h: f64,
    pub t_final: f64,
    pub sample_every: usize,
    pub energy_ceiling: f64,
    pub kick_factor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Reweight,
    Imh,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    pub size: usize,
    pub method: Method,
    pub burn_in: usize,
    pub chains: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gates {
    /// Largest admissible |z| for equality claims.
    pub z_max: f64,
    /// Largest admissible |z| against an independent discretization oracle.
    pub z_oracle: f64,
    /// Smallest admissible ESS; below it the verdict is inconclusive.
    pub ess_floor: f64,
    /// Relative tolerance for ergodic averages.
    pub rel_tol: f64,
    pub ks_p_min: f64,
    /// Smallest admissible decay rate.
    pub min_rate: f64,
    /// Largest admissible log-log slope.
    pub max_slope: f64,
    /// Smallest admissible convergence order.
    pub min_order: f64,
    /// Admissible multiplicative spread.
    pub factor: f64,
    pub residual_max: f64,
    pub gram_tol: f64,
    /// Run the broken-dynamics variant and require it to fail.
    pub negative_control: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    /// Regularity index of Hölder and `X^α` norms.
    pub alpha: f64,
    /// Time horizon of `X^α` sups and decay fits.
    pub horizon: f64,
    /// Time grid spacing of `X^α` sups.
    pub dt: f64,
    /// Discarded initial time of ergodic averages.
    pub burn_in_time: f64,
    /// Initial data for ergodic runs: `zero`, `high_mode`, `mu`.
    pub initial_data: Vec<String>,
    /// Ensemble size of the reference estimates.
    pub reference_size: usize,
    /// Time at which stochastic convolutions are sampled.
    pub stick_time: f64,
    pub windows: usize,
    pub samples: usize,
    pub truncations: Vec<i64>,
    pub scales: Vec<f64>,
    pub initial_energy: f64,
    pub control_time: f64,
    pub control_steps: usize,
    pub control_band: i64,
    /// Number of independent noise paths or chain steps.
    pub paths: usize,
    /// Fine step `2^{-fine_exponent}` of the order oracle.
    pub fine_exponent: u32,
    /// Coarse steps `2^{-e}` of the order study.
    pub exponents: Vec<u32>,
    /// Mode magnitudes probed along the first axis.
    pub modes: Vec<i64>,
    pub em_substeps: usize,
    /// Window length of the Picard oracle.
    pub picard_window: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub grid: GridSection,
    pub flow: FlowSection,
    pub ensemble: EnsembleSection,
    pub observables: Vec<String>,
    pub gates: Gates,
    pub params: Params,
}

impl ExperimentConfig {
    /// Default configuration of an experiment.
    pub fn preset(kind: ExperimentKind) -> Self {
        let mut c = Self {
            experiment: kind,
            seed: 20_240_601,
            grid: GridSection { dim: 1, points: 66, dispersion: 2.0 },
            flow: FlowSection {
                truncation: 16,
                gamma: 0.1,
                h: 0.01,
                t_final: 5.0,
                sample_every: 0,
                energy_ceiling: 1e12,
                kick_factor: 1.0,
            },
            ensemble: EnsembleSection { size: 8192, method: Method::Reweight, burn_in: 256, chains: 8 },
            observables: vec!["l2_u".into(), "l2_ut".into(), "quartic".into(), "mode_re:1".into()],
            gates: Gates {
                z_max: 4.0,
                z_oracle: 4.0,
                ess_floor: 500.0,
                rel_tol: 0.05,
                ks_p_min: 0.01,
                min_rate: 0.125,
                max_slope: -0.4,
                min_order: 1.0,
                factor: 2.0,
                residual_max: 1e-6,
                gram_tol: 0.05,
                negative_control: true,
            },
            params: Params {
                alpha: 0.4,
                horizon: 20.0,
                dt: 0.05,
                burn_in_time: 100.0,
                initial_data: vec!["zero".into(), "high_mode".into(), "mu".into()],
                reference_size: 16384,
                stick_time: 2.0,
                windows: 8,
                samples: 256,
                truncations: vec![4, 8, 16, 32],
                scales: vec![1.0, 2.0, 4.0, 8.0],
                initial_energy: 1e3,
                control_time: 1.0,
                control_steps: 2048,
                control_band: 8,
                paths: 10_000,
                fine_exponent: 13,
                exponents: vec![6, 7, 8, 9, 10],
                modes: vec![1, 2, 4, 8],
                em_substeps: 1024,
                picard_window: 0.03125,
            },
        };
        match kind {
            ExperimentKind::Ou => {
                c.grid.points = 9;
                c.flow.truncation = -1;
                c.flow.gamma = 0.0;
                c.flow.h = 0.1;
                c.flow.t_final = 10_000.0;
                c.gates.z_max = 3.0;
                c.params.modes = vec![0, 1, 2, 3];
                c.params.paths = 4000;
            }
            ExperimentKind::Invariance => {}
            ExperimentKind::Ergodicity => {
                c.flow.t_final = 2000.0;
                c.observables = vec!["l2_u".into(), "quartic".into()];
            }
            ExperimentKind::Linear => {
                c.grid.points = 34;
                c.flow.truncation = -1;
                c.flow.gamma = 0.0;
                c.flow.h = 0.1;
                c.flow.t_final = 20.0;
                c.ensemble.size = 2000;
                c.gates.min_rate = 0.125;
            }
            ExperimentKind::Decay => {
                c.flow.truncation = -1;
                c.flow.gamma = 0.0;
                c.flow.h = 0.05;
            }
            ExperimentKind::Nstability => {
                c.grid.points = 258;
                c.flow.gamma = 1.0;
                c.flow.h = 1e-3;
                c.flow.t_final = 1.0;
                c.flow.truncation = 64;
                c.gates.factor = 3.0;
            }
            ExperimentKind::Coupling => {
                c.flow.gamma = 1.0;
                c.flow.t_final = 200.0;
                c.gates.factor = 1.2;
            }
            ExperimentKind::Order => {
                c.grid.points = 34;
                c.flow.truncation = 8;
                c.flow.gamma = 1.0;
                c.flow.t_final = 1.0;
            }
            ExperimentKind::Energy => {
                c.flow.gamma = 1.0;
                c.flow.t_final = 500.0;
                c.gates.min_rate = 0.2;
            }
            ExperimentKind::Xalpha => {
                c.grid = GridSection { dim: 3, points: 17, dispersion: 4.0 };
                c.flow.truncation = -1;
                c.flow.gamma = 0.0;
            }
            ExperimentKind::Control => {
                c.grid = GridSection { dim: 3, points: 17, dispersion: 4.0 };
                c.flow.truncation = -1;
                c.flow.gamma = 0.0;
                c.params.modes = vec![4];
            }
            ExperimentKind::Girsanov => {
                c.grid.points = 17;
                c.flow.truncation = -1;
                c.flow.gamma = 0.0;
                c.flow.t_final = 1.0;
                c.params.control_band = 4;
            }
        }
        c
    }

    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::new(self.grid.dim, self.grid.points, self.grid.dispersion)
    }

    pub fn flow_config(&self) -> Result<FlowConfig> {
        let mut f = FlowConfig::new(self.grid()?, self.flow.truncation, self.flow.gamma, self.flow.h, self.flow.t_final)?;
        f.sample_every = self.flow.sample_every;
        f.energy_ceiling = self.flow.energy_ceiling;
        f.kick_factor = self.flow.kick_factor;
        Ok(f)
    }

    pub fn gibbs_config(&self) -> Result<GibbsConfig> {
        GibbsConfig::new(self.grid()?, self.flow.truncation, self.flow.gamma)
    }

    pub fn sampler(&self) -> SamplerMethod {
        match self.ensemble.method {
            Method::Reweight => SamplerMethod::Reweight,
            Method::Imh => SamplerMethod::Imh { burn_in: self.ensemble.burn_in, chains: self.ensemble.chains },
        }
    }

    pub fn parsed_observables(&self) -> Result<Vec<Observable>> {
        self.observables.iter().map(|s| s.parse()).collect()
    }

    /// Structural checks shared by all experiments.
    pub fn validate(&self) -> Result<()> {
        let grid = self.grid()?;
        if self.ensemble.size < 2 {
            return Err(Error::InvalidArgument("ensemble size must be at least 2".into()));
        }
        let g = &self.gates;
        for (name, v) in [("z_max", g.z_max), ("z_oracle", g.z_oracle), ("rel_tol", g.rel_tol), ("ks_p_min", g.ks_p_min), ("factor", g.factor), ("residual_max", g.residual_max), ("gram_tol", g.gram_tol)] {
            if !(v > 0.0) {
                return Err(Error::InvalidArgument(format!("gate {name} must be positive, got {v}")));
            }
        }
        for obs in self.parsed_observables()? {
            if let Observable::ModeRe(n) | Observable::ModeIm(n) = obs {
                if grid.index(n).is_none() {
                    return Err(Error::InvalidArgument(format!("observable mode {n:?} outside the grid band")));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid_and_round_trip() {
        for kind in ExperimentKind::ALL {
            let c = ExperimentConfig::preset(kind);
            c.validate().unwrap();
            c.grid().unwrap();
            let json = serde_json::to_string(&c).unwrap();
            let back: ExperimentConfig = serde_json::from_str(&json).unwrap();
            assert_eq!(back, c);
            assert_eq!(serde_json::to_value(kind).unwrap(), serde_json::Value::String(kind.name().into()));
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut v = ExperimentConfig::preset(ExperimentKind::Invariance).to_json();
        v["gates"]["bogus"] = serde_json::json!(1.0);
        assert!(serde_json::from_value::<ExperimentConfig>(v).is_err());
    }

    #[test]
    fn invalid_gates_are_rejected() {
        let mut c = ExperimentConfig::preset(ExperimentKind::Invariance);
        c.gates.z_max = 0.0;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::preset(ExperimentKind::Invariance);
        c.ensemble.size = 1;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::preset(ExperimentKind::Invariance);
        c.observables.push("mode_re:40".into());
        assert!(c.validate().is_err());
    }
}
