use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use gibbsdyn::gibbs::sample_mu;
use gibbsdyn::linear::{generator, mode_matrix, stationary_covariance, steps_for, PropagatorTable};
use gibbsdyn::rng::{stream, Purpose};
use gibbsdyn::spectral::PairField;
use gibbsdyn::{Error, Pair, Result};
use num_complex::Complex;

use super::new_report;
use crate::config::ExperimentConfig;
use crate::report::{ExperimentReport, Gate, Relation};
use crate::stats::{batch_means, Moments};

/// Exact Ornstein–Uhlenbeck stepping: long-run second moments against the stationary
/// covariance, and the one-step kernel against a fine Euler–Maruyama discretization.
pub fn ou(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let grid = cfg.grid()?;
    if cfg.flow.gamma != 0.0 {
        return Err(Error::InvalidArgument("the OU experiment needs gamma = 0".into()));
    }
    let h = cfg.flow.h;
    let steps = steps_for(cfg.flow.t_final, h)?;
    let modes: Vec<[i64; 3]> = cfg.params.modes.iter().map(|&k| [k, 0, 0]).collect();
    let idx: Vec<usize> = modes
        .iter()
        .map(|&n| grid.index(n).ok_or_else(|| Error::InvalidArgument(format!("mode {n:?} outside the grid"))))
        .collect::<Result<_>>()?;
    let mut report = new_report(cfg);
    let table = PropagatorTable::<f64>::new(grid, h)?;

    // long chain started at stationarity
    let mut rng = stream(cfg.seed, Purpose::Dynamics, 0);
    let mut state: Pair = sample_mu(grid, &mut rng);
    let mut series = vec![vec![Vec::with_capacity(steps); 3]; modes.len()];
    let mut inc = Vec::new();
    for _ in 0..steps {
        table.sample_increments(&mut rng, &mut inc);
        table.apply_in_place(&mut state, &inc);
        for (j, &i) in idx.iter().enumerate() {
            let (u, p) = (state.u.coeffs()[i], state.p.coeffs()[i]);
            series[j][0].push(u.norm_sqr());
            series[j][1].push(p.norm_sqr());
            series[j][2].push((u * p.conj()).re);
        }
    }
    let batches = 100.min(steps / 10).max(2);
    let mut worst = 0.0f64;
    for (j, &n) in modes.iter().enumerate() {
        let c = stationary_covariance(&grid, n);
        for (k, (label, target)) in [("uu", c[0][0]), ("pp", c[1][1]), ("up", c[0][1])].into_iter().enumerate() {
            let (m, se) = batch_means(&series[j][k], batches);
            let z = (m - target) / se;
            report.stat(format!("stationary_{label}_mode{}", n[0]), serde_json::json!({"mean": m, "target": target, "se": se, "z": z}));
            worst = worst.max(z.abs());
        }
    }
    report.gate(Gate::new("stationary_moments_max_abs_z", worst, Relation::AtMost, cfg.gates.z_max));

    // one-step kernel against Euler–Maruyama on the same modes
    let paths = cfg.params.paths;
    let sub = cfg.params.em_substeps;
    let x0 = (0.8, -0.3);
    let mut start = PairField::zeros(grid);
    for &n in &modes {
        start.u.set_mode(n, Complex::new(x0.0, 0.0))?;
        start.p.set_mode(n, Complex::new(x0.1, 0.0))?;
    }
    let exact: Vec<Vec<(f64, f64)>> = (0..paths)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(cfg.seed, Purpose::Auxiliary(0), k as u64);
            let mut s = start.clone();
            let mut inc = Vec::new();
            table.sample_increments(&mut rng, &mut inc);
            table.apply_in_place(&mut s, &inc);
            idx.iter().map(|&i| (s.u.coeffs()[i].re, s.p.coeffs()[i].re)).collect()
        })
        .collect();
    let em: Vec<Vec<(f64, f64)>> = (0..paths)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(cfg.seed, Purpose::Auxiliary(1), k as u64);
            let dt = h / sub as f64;
            modes
                .iter()
                .map(|&n| {
                    let a = generator(&grid, n);
                    // real parts of non-zero modes carry half the noise
                    let var = if n == [0, 0, 0] { 2.0 } else { 1.0 };
                    let amp = (var * dt).sqrt();
                    let (mut u, mut p) = x0;
                    for _ in 0..sub {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        let du = (a[0][0] * u + a[0][1] * p) * dt;
                        let dp = (a[1][0] * u + a[1][1] * p) * dt + amp * z;
                        u += du;
                        p += dp;
                    }
                    (u, p)
                })
                .collect()
        })
        .collect();
    let mut worst = 0.0f64;
    for (j, &n) in modes.iter().enumerate() {
        let m = mode_matrix::<f64>(n, h, &grid).matrix;
        let mean = (m[0][0] * x0.0 + m[0][1] * x0.1, m[1][0] * x0.0 + m[1][1] * x0.1);
        let feats = |x: (f64, f64)| [x.0, x.1, x.0 * x.0, x.1 * x.1, x.0 * x.1];
        let mut me = [Moments::default(); 5];
        let mut mm = [Moments::default(); 5];
        for k in 0..paths {
            for (f, v) in feats(exact[k][j]).into_iter().enumerate() {
                me[f].push(v);
            }
            for (f, v) in feats(em[k][j]).into_iter().enumerate() {
                mm[f].push(v);
            }
        }
        let zs: Vec<f64> = (0..5)
            .map(|f| (me[f].mean() - mm[f].mean()) / (me[f].std_error().powi(2) + mm[f].std_error().powi(2)).sqrt())
            .collect();
        let mode_worst = zs.iter().fold(0.0f64, |a, z| a.max(z.abs()));
        report.stat(
            format!("kernel_mode{}", n[0]),
            serde_json::json!({"exact_mean": mean, "em_mean_u": mm[0].mean(), "em_mean_p": mm[1].mean(), "z": zs}),
        );
        worst = worst.max(mode_worst);
    }
    report.stat("em_substeps", sub);
    report.gate(Gate::new("kernel_vs_euler_maruyama_max_abs_z", worst, Relation::AtMost, cfg.gates.z_oracle));
    Ok(report)
}
