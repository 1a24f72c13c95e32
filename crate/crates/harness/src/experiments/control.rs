use rayon::prelude::*;

use gibbsdyn::control::{forward_map, girsanov_logdensity, gram_form, right_inverse};
use gibbsdyn::grid::norm_sq;
use gibbsdyn::linear::{sample_stick, steps_for, PropagatorTable};
use gibbsdyn::rng::{stream, Purpose};
use gibbsdyn::spectral::sobolev_pair_norm;
use gibbsdyn::{Error, Result};

use super::{new_report, random_band_limited};
use crate::config::ExperimentConfig;
use crate::report::{ExperimentReport, Gate, Relation};
use crate::stats::Moments;

/// Reachability of the linear dynamics: the minimum-norm control reproduces a target state,
/// and the per-mode Gram forms approach `t/2` times the identity at high frequency.
pub fn control(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let grid = cfg.grid()?;
    let mut report = new_report(cfg);
    let t = cfg.params.control_time;
    let steps = cfg.params.control_steps;
    let half = 0.5 * grid.dispersion();

    let mut worst = 0.0f64;
    let mut ratios = Vec::new();
    for k in 0..4u64 {
        let w = random_band_limited(grid, cfg.params.control_band, cfg.seed, k);
        let ctrl = right_inverse(&w, t, steps)?;
        let back = forward_map(&ctrl)?;
        let wn = sobolev_pair_norm(&w, half);
        worst = worst.max(sobolev_pair_norm(&back.sub(&w), half) / wn);
        ratios.push(ctrl.norm_sq().sqrt() / wn);
    }
    report.stat("control_to_target_norm_ratios", &ratios);
    report.gate(Gate::new("reconstruction_relative_residual", worst, Relation::AtMost, cfg.gates.residual_max));

    let cutoff = *cfg.params.modes.first().ok_or_else(|| Error::InvalidArgument("params.modes must name the Gram cutoff".into()))?;
    let mut dev = 0.0f64;
    let mut count = 0usize;
    for (_, n) in grid.modes() {
        if norm_sq(n) >= cutoff * cutoff {
            let e = gram_form(n, t, &grid)?.eigenvalues();
            dev = dev.max((e[0] - 0.5 * t).abs()).max((e[1] - 0.5 * t).abs());
            count += 1;
        }
    }
    report.stat("gram_modes_checked", count);
    report.gate(Gate::new("gram_eigenvalue_deviation", dev, Relation::AtMost, cfg.gates.gram_tol));
    Ok(report)
}

/// Normalization of the Girsanov density: `E exp(log ℰ(h)) = 1` over independent noise paths
/// for a fixed control.
pub fn girsanov(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let grid = cfg.grid()?;
    let mut report = new_report(cfg);
    let t = cfg.flow.t_final;
    let h = cfg.flow.h;
    let steps = steps_for(t, h)?;
    let w = random_band_limited(grid, cfg.params.control_band, cfg.seed, 0);
    let raw = right_inverse(&w, t, steps)?;
    let ctrl = raw.scale((0.5 / raw.norm_sq()).sqrt());
    let energy = ctrl.norm_sq();
    let table = PropagatorTable::<f64>::new(grid, h)?;
    let logs: Vec<f64> = (0..cfg.params.paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(cfg.seed, Purpose::Dynamics, i as u64);
            let (_, path) = sample_stick(t, &table, &mut rng, cfg.seed)?;
            girsanov_logdensity(&ctrl, &path)
        })
        .collect::<Result<_>>()?;
    let summarize = |shift: f64| {
        let mut m = Moments::default();
        for l in &logs {
            m.push((l + shift).exp());
        }
        (m.mean(), m.std_error())
    };
    let (mean, se) = summarize(0.0);
    let z = (mean - 1.0) / se;
    report.stat("control_norm_sq", energy);
    report.stat("density_mean", serde_json::json!({"mean": mean, "se": se, "z": z}));
    report.gate(Gate::new("density_mean_z", z, Relation::AbsAtMost, cfg.gates.z_oracle));
    if cfg.gates.negative_control {
        let (m, se) = summarize(0.5 * energy);
        let z = (m - 1.0) / se;
        report.stat("negative_control", serde_json::json!({"breakage": "compensator dropped", "mean": m, "z": z}));
        report.gate(Gate::new("negative_control_abs_z", z.abs(), Relation::AtLeast, cfg.gates.z_oracle));
    }
    Ok(report)
}
