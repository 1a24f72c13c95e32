//! Experiments. Each takes a resolved configuration and returns a report whose verdict
//! follows from its gates. Ensemble members run in parallel on their own random streams
//! and are reduced in index order, so reports do not depend on the thread count.

mod control;
mod decay;
mod ergodicity;
mod flowruns;
mod invariance;
mod linear;
mod ou;
mod selftest;
mod xalpha;

pub use control::{control, girsanov};
pub use decay::decay;
pub use ergodicity::ergodicity;
pub use flowruns::{coupling, energy, nstability, order};
pub use invariance::invariance;
pub use linear::linear;
pub use ou::ou;
pub use selftest::{selftest, selftest_configs};
pub use xalpha::xalpha;

use num_complex::Complex;

use gibbsdyn::flow::IncrementSource;
use gibbsdyn::gibbs::sample_mu;
use gibbsdyn::linear::PropagatorTable;
use gibbsdyn::noise::Increment;
use gibbsdyn::rng::{stream, Purpose};
use gibbsdyn::spectral::{PairField, SpectralField};
use gibbsdyn::{Error, GridSpec, Pair, Result};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::report::ExperimentReport;

pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    match cfg.experiment {
        ExperimentKind::Ou => ou(cfg),
        ExperimentKind::Invariance => invariance(cfg),
        ExperimentKind::Ergodicity => ergodicity(cfg),
        ExperimentKind::Linear => linear(cfg),
        ExperimentKind::Decay => decay(cfg),
        ExperimentKind::Nstability => nstability(cfg),
        ExperimentKind::Coupling => coupling(cfg),
        ExperimentKind::Order => order(cfg),
        ExperimentKind::Energy => energy(cfg),
        ExperimentKind::Xalpha => xalpha(cfg),
        ExperimentKind::Control => control(cfg),
        ExperimentKind::Girsanov => girsanov(cfg),
    }
}

pub(crate) fn new_report(cfg: &ExperimentConfig) -> ExperimentReport {
    ExperimentReport::new(cfg.experiment.name(), cfg.seed, cfg.to_json())
}

/// Reports that use the Gibbs measure state which measure they actually sampled.
pub fn truncation_note(truncation: i64) -> String {
    if truncation < 0 {
        "Interaction off: the Gibbs measure here is the Gaussian base measure.".into()
    } else {
        format!("The Gibbs measure is the one truncated at N = {truncation}; the untruncated quartic weight is not representable on the grid.")
    }
}

/// Named initial data: `zero`, `high_mode` (a cosine at the truncation edge), `mu` (a draw
/// from the base measure).
pub fn initial_datum(name: &str, grid: GridSpec, truncation: i64, seed: u64, index: u64) -> Result<Pair> {
    match name {
        "zero" => Ok(PairField::zeros(grid)),
        "high_mode" => {
            let k = truncation.max(1).min(grid.band());
            let u = SpectralField::cosine(grid, [k, 0, 0], 2.0)?;
            PairField::new(u, SpectralField::zeros(grid))
        }
        "mu" => Ok(sample_mu(grid, &mut stream(seed, Purpose::Initial, index))),
        other => Err(Error::InvalidArgument(format!("unknown initial datum '{other}'"))),
    }
}

/// Multiplies every increment of an inner source: the broken-noise negative control.
pub struct ScaledNoise<S> {
    pub inner: S,
    pub factor: f64,
}

impl<S: IncrementSource<f64>> IncrementSource<f64> for ScaledNoise<S> {
    fn next(&mut self, table: &PropagatorTable<f64>, out: &mut Vec<Increment<f64>>) -> Result<()> {
        self.inner.next(table, out)?;
        let f = self.factor;
        for inc in out.iter_mut() {
            inc.eta_u *= f;
            inc.eta_p *= f;
            inc.dw *= f;
        }
        Ok(())
    }
}

/// A real field with uniform random coefficients on the cube `max_j |n_j| <= band`.
pub fn random_band_limited(grid: GridSpec, band: i64, seed: u64, index: u64) -> Pair {
    use rand::Rng;
    let mut rng = stream(seed, Purpose::Control, index);
    let mut w = PairField::zeros(grid);
    for i in grid.half_lattice() {
        let n = grid.mode(i);
        if gibbsdyn::grid::max_abs(n) <= band {
            let mut draw = || Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            w.u.coeffs_mut()[i] = draw();
            w.p.coeffs_mut()[i] = draw();
        }
    }
    w.u.coeffs_mut()[grid.center()].im = 0.0;
    w.p.coeffs_mut()[grid.center()].im = 0.0;
    w.u.symmetrize();
    w.p.symmetrize();
    w
}
