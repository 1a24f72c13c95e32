use gibbsdyn::grid::japanese;
use gibbsdyn::linear::{single_mode_state, xalpha_norm, xalpha_tail_bound};
use gibbsdyn::spectral::{sobolev_pair_norm, PairField};
use gibbsdyn::{Pair, Result};

use super::{new_report, random_band_limited};
use crate::config::ExperimentConfig;
use crate::report::{ExperimentReport, Gate, Relation};

/// Scaling of the weighted-in-time Hölder norm on single modes, and its comparison with
/// the Sobolev norm on a smooth random field.
pub fn xalpha(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let grid = cfg.grid()?;
    let mut report = new_report(cfg);
    let (alpha, horizon, dt) = (cfg.params.alpha, cfg.params.horizon, cfg.params.dt);
    let mut ratios = Vec::new();
    for &k in &cfg.params.modes {
        let n = [k, 0, 0];
        let v: Pair = single_mode_state(grid, n)?;
        let x = xalpha_norm(&v, alpha, horizon, dt)?;
        let r = x / japanese(n).powf(alpha);
        report.stat(format!("mode{k}"), serde_json::json!({"xalpha": x, "ratio": r, "tail_bound": xalpha_tail_bound(&v, alpha, horizon)}));
        ratios.push(r);
    }
    let spread = ratios.iter().cloned().fold(f64::MIN, f64::max) / ratios.iter().cloned().fold(f64::MAX, f64::min);
    report.gate(Gate::new("single_mode_ratio_spread", spread, Relation::AtMost, cfg.gates.factor));

    let v = random_band_limited(grid, 2, cfg.seed, 0);
    let half = 0.5 * grid.dispersion();
    let coarse = xalpha_norm(&v, alpha, horizon, dt)? / sobolev_pair_norm(&v, half);
    let fine_grid = grid.with_points(2 * grid.points() - 1)?;
    let vf = PairField::new(v.u.refined(fine_grid)?, v.p.refined(fine_grid)?)?;
    let fine = xalpha_norm(&vf, alpha, horizon, dt)? / sobolev_pair_norm(&vf, half);
    report.stat("smooth_field_constant", serde_json::json!({"coarse": coarse, "refined": fine}));
    Ok(report)
}
