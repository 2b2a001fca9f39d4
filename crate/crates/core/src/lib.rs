//! Anderson–Bernoulli random polymer models on the one-dimensional lattice.
//!
//! The crate samples random polymer Hamiltonians, computes their spectra,
//! transfer matrices and Prüfer phases, and runs the eigenvalue-statistics
//! and transport experiments that separate critical energies (clock
//! statistics, vanishing Lyapunov exponent) from the localized regime
//! (Poisson statistics).
//!
//! The numeric kernels are generic over [`Real`] (`f32` or `f64`); the aliases
//! at the crate root fix them to `f64`, which is what the experiments use.

// `!(x > 0)` is deliberate: it rejects NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod eigensolve;
pub mod experiment;
pub mod error;
pub mod model;
pub mod prufer;
pub mod rng;
pub mod scalar;
pub mod statistics;
pub mod transfer;
pub mod transport;

pub use error::{Error, Result};
pub use model::{BoxSize, Configuration, Sign};
pub use scalar::Real;

pub type PolymerSpec = model::PolymerSpec<f64>;
pub type PolymerModel = model::PolymerModel<f64>;
pub type LatticeSequences = model::LatticeSequences<f64>;
pub type TridiagonalOperator = eigensolve::TridiagonalOperator<f64>;
pub type Spectrum = eigensolve::Spectrum<f64>;
pub type DenseEigen = eigensolve::DenseEigen<f64>;
pub type Mat2 = transfer::Mat2<f64>;
pub type CriticalEnergyReport = transfer::CriticalEnergyReport<f64>;
pub type ExpansionCoeffs = transfer::ExpansionCoeffs<f64>;
pub type PruferTrace = prufer::PruferTrace<f64>;
pub type PhaseParts = prufer::PhaseParts<f64>;
