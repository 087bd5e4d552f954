//! Drifts given by their Fourier symbols and the averaging operator
//! `T^w_{s,t} b(x) = ∫_s^t b(x + w_r) dr = (2π)^{-d} Σ_z b̂(z) μ̂_{s,t}(z) e^{i⟨z,x⟩} Δz^d`.
//!
//! A drift is a finite sum of terms `v · φ(x)` with a direction `v ∈ R^d`
//! and a scalar distribution `φ`. Band-limited terms (bumps, Dirac masses
//! and their derivatives, gridded symbols) are sampled on a frequency grid;
//! trigonometric atoms and smooth functions are evaluated exactly.

mod drift;
mod field;

pub use drift::{BesovTag, DriftEvaluator, DriftTerm, SmoothFn, SpectralDrift, Symbol};
pub use field::{
    average, average_along_path, holder_in_time_norm, mollify_convergence, AveragedField, HolderNormReport,
    MollifyReport, OrderSup,
};
