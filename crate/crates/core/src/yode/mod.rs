//! Nonlinear Young ODEs `y_t = x + ∫_0^t Y_{dr}(y_r)` with `Y = T^w b`:
//! Picard continuation with explosion detection, flow-derivative jets from
//! the lower-triangular augmented system, and the sewn integral itself.

mod classical;
mod field;
mod integral;
mod solver;

pub use classical::classical_solution;
pub use field::{field_bounds, window_jet, AveragedDrift, DifferenceField, FieldBounds, NonlinearField};
pub use integral::{fitted_holder_exponent, nonlinear_young_integral, YoungIntegral};
pub use solver::{
    holder_quotient, picard_subinterval, reconstruct_solution, solve, solve_flow, ContractionEntry, FlowJet,
    FlowSummary, PicardOutcome, SolveConfig, SolveStatus,
};
