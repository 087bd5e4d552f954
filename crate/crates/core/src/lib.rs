//! Numerical toolkit for regularization by noise.
//!
//! The crate is organised as a pipeline:
//!
//! * [`gaussmodels`]: centered Gaussian process models (fBm, p-log Brownian
//!   motion, fBm series, Volterra kernels), exact sampling, conditional laws
//!   and local non-determinism profiles.
//! * [`occupation`]: Fourier transforms of occupation measures, local-time
//!   reconstruction and space-time regularity estimates.
//! * [`funcspaces`]: discrete Littlewood–Paley blocks and weighted Besov norms.
//! * [`averaging`]: spectral drifts and the averaging operator
//!   `T^w_{s,t} b(x) = ∫_s^t b(x + w_r) dr` with its spatial jets.
//! * [`sewing`]: the dyadic sewing engine and a Monte Carlo checker for the
//!   stochastic sewing hypotheses.
//! * [`yode`]: nonlinear Young ODE solver with flow-derivative jets.
//!
//! Everything is deterministic given a seed; batch operations split the seed
//! space as `seed_i = base_seed + i`.

pub mod averaging;
pub mod error;
pub mod fourier;
pub mod funcspaces;
pub mod gaussmodels;
pub mod grid;
pub mod io;
pub mod numerics;
pub mod occupation;
pub mod sewing;
pub mod tensor;
pub mod yode;

pub use error::{Error, Result};
pub use grid::{FrequencyGrid, TimeGrid};
