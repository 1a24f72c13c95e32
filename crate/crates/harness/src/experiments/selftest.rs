use gibbsdyn::Result;

use super::new_report;
use crate::config::{ExperimentConfig, ExperimentKind};
use crate::report::{ExperimentReport, Gate};

/// Reduced configurations of the experiments, small enough to run in seconds.
pub fn selftest_configs(seed: u64) -> Vec<ExperimentConfig> {
    let mut out = Vec::new();
    let mut push = |kind: ExperimentKind, tweak: &dyn Fn(&mut ExperimentConfig)| {
        let mut c = ExperimentConfig::preset(kind);
        c.seed = seed;
        tweak(&mut c);
        out.push(c);
    };
    push(ExperimentKind::Ou, &|c| {
        c.flow.t_final = 2000.0;
        c.params.paths = 1000;
        c.params.em_substeps = 256;
        c.gates.z_max = 4.0;
    });
    push(ExperimentKind::Invariance, &|c| {
        c.grid.points = 34;
        c.flow.truncation = 8;
        c.flow.gamma = 0.5;
        c.flow.t_final = 2.0;
        c.ensemble.size = 1024;
        c.gates.ess_floor = 200.0;
    });
    push(ExperimentKind::Linear, &|c| {
        c.ensemble.size = 500;
        c.flow.t_final = 10.0;
        c.params.horizon = 10.0;
    });
    push(ExperimentKind::Decay, &|c| {
        c.params.samples = 32;
        c.params.windows = 4;
        c.params.dt = 0.1;
    });
    push(ExperimentKind::Order, &|c| {
        c.params.fine_exponent = 11;
        c.params.exponents = vec![5, 6, 7, 8];
    });
    push(ExperimentKind::Control, &|c| {
        c.grid.points = 9;
        c.params.control_band = 4;
        c.params.control_steps = 512;
    });
    push(ExperimentKind::Girsanov, &|c| c.params.paths = 2000);
    push(ExperimentKind::Xalpha, &|c| {
        c.grid.points = 9;
        c.params.modes = vec![1, 2, 4];
        c.params.horizon = 10.0;
    });
    out
}

/// Runs every reduced configuration and collects their gates under prefixed names.
pub fn selftest(seed: u64) -> Result<ExperimentReport> {
    let configs = selftest_configs(seed);
    let mut head = ExperimentConfig::preset(ExperimentKind::Ou);
    head.seed = seed;
    let mut report = new_report(&head);
    report.experiment = "selftest".into();
    report.config = serde_json::Value::Array(configs.iter().map(|c| c.to_json()).collect());
    for c in &configs {
        let sub = super::run(c)?;
        let name = c.experiment.name();
        for g in sub.gates {
            report.gate(Gate { name: format!("{name}.{}", g.name), ..g });
        }
        for (k, v) in sub.statistics {
            report.stat(format!("{name}.{k}"), v);
        }
    }
    Ok(report)
}
