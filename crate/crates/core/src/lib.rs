//! Spectral Galerkin simulation of damped stochastic nonlinear wave and beam equations on
//! the torus `T^d`, with the Gaussian base measure, its Gibbs reweighting, exact
//! Ornstein–Uhlenbeck stepping, and the controllability and change-of-measure tools used
//! to verify invariance and ergodicity numerically.
//!
//! Everything numerical is generic over the scalar type ([`Real`], implemented for `f32`
//! and `f64`). The aliases at the crate root fix `f64`, which is what the harness uses.

pub mod control;
pub mod error;
pub mod flow;
pub mod gibbs;
pub mod grid;
pub mod linear;
pub mod noise;
pub mod real;
pub mod rng;
pub mod spectral;

pub use error::{Error, Result};
pub use grid::{GridSpec, Mode};
pub use real::Real;

pub type Field = spectral::SpectralField<f64>;
pub type Pair = spectral::PairField<f64>;
pub type Table = linear::PropagatorTable<f64>;
pub type Noise = noise::NoisePath<f64>;
pub type Ensemble = gibbs::WeightedEnsemble<f64>;
pub type Flow = flow::FlowConfig;

pub type Field32 = spectral::SpectralField<f32>;
pub type Pair32 = spectral::PairField<f32>;
