//! Adaptive classical reference for `ẏ = b(y + w_t)`, with `w` linear between
//! grid points.

use std::cell::RefCell;

use ode_solvers::dop_shared::OutputType;
use ode_solvers::{DVector, Dop853, System};

use crate::averaging::{DriftEvaluator, SpectralDrift};
use crate::error::{Error, Result};
use crate::gaussmodels::SamplePath;
use crate::grid::FrequencyGrid;
use crate::tensor::Jet;

struct Forced<'a> {
    evaluator: &'a DriftEvaluator,
    w0: &'a [f64],
    w1: &'a [f64],
    t0: f64,
    dt: f64,
    failure: &'a RefCell<Option<Error>>,
}

impl System<f64, DVector<f64>> for Forced<'_> {
    fn system(&self, t: f64, y: &DVector<f64>, dy: &mut DVector<f64>) {
        let theta = (t - self.t0) / self.dt;
        let x: Vec<f64> = (0..y.len())
            .map(|a| y[a] + (1.0 - theta) * self.w0[a] + theta * self.w1[a])
            .collect();
        let mut jet = Jet::zeros(y.len(), 0);
        match self.evaluator.add_jet(&x, 1.0, &mut jet) {
            Ok(()) => dy.iter_mut().zip(&jet.levels[0]).for_each(|(d, v)| *d = *v),
            Err(e) => {
                self.failure.borrow_mut().get_or_insert(e);
                dy.fill(f64::NAN);
            }
        }
    }
}

/// `y_t` solving `ẏ = b(y + w_t)`, `y_0 = x`, on the grid of `w` (so that
/// `ỹ = y + w` solves the perturbed equation). Dormand–Prince 8(5,3) with
/// tolerance `tol`, restarted on every grid interval.
pub fn classical_solution(
    drift: &SpectralDrift,
    w: &SamplePath,
    x: &[f64],
    grid: Option<FrequencyGrid>,
    tol: f64,
) -> Result<SamplePath> {
    let d = w.dim;
    if drift.dim != d || x.len() != d {
        return Err(Error::GridMismatch("drift, path and initial condition dimensions differ".into()));
    }
    let evaluator = DriftEvaluator::new(drift, grid, 0)?;
    let dt = w.grid.dt();
    let mut values = x.to_vec();
    let mut y = DVector::from_column_slice(x);
    let failure = RefCell::new(None);
    for i in 0..w.grid.steps() {
        let t0 = w.grid.time(i);
        let system = Forced {
            evaluator: &evaluator,
            w0: w.point(i),
            w1: w.point(i + 1),
            t0,
            dt,
            failure: &failure,
        };
        let mut stepper = Dop853::new(system, t0, t0 + dt, dt, y.clone(), tol, tol);
        stepper.set_output(OutputType::Sparse);
        let outcome = stepper.integrate();
        if let Some(e) = failure.borrow_mut().take() {
            return Err(e);
        }
        outcome.map_err(|e| Error::Domain(format!("classical integrator failed at t = {t0}: {e:?}")))?;
        y = stepper
            .y_out()
            .last()
            .cloned()
            .ok_or_else(|| Error::Domain("classical integrator produced no output".into()))?;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("classical solution is not finite at t = {}", t0 + dt)));
        }
        values.extend(y.iter());
    }
    SamplePath::from_values(w.grid, d, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::averaging::Symbol;
    use crate::gaussmodels::{sample, GaussianModel};
    use crate::yode::{reconstruct_solution, solve, AveragedDrift, SolveConfig};

    #[test]
    fn young_solution_matches_adaptive_integrator() {
        let drift = SpectralDrift::scalar(1, Symbol::Sine { amplitude: 1.0, frequency: vec![1.0], phase: 0.0 }).unwrap();
        let w = sample(&GaussianModel::brownian(1, 1.0).unwrap(), 4096, 21).unwrap();
        let field = AveragedDrift::smooth(&drift, w.clone(), 1).unwrap();
        let jet = solve(&field, &[0.5], &SolveConfig::default()).unwrap();
        let reference = classical_solution(&drift, &w, &[0.5], None, 1e-12).unwrap();
        let err = (0..jet.len())
            .map(|i| (jet.value(0, i)[0] - reference.point(i)[0]).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn mollified_solutions_approach_the_limit() {
        let drift = SpectralDrift::scalar(1, Symbol::Sine { amplitude: 1.0, frequency: vec![1.0], phase: 0.0 }).unwrap();
        let w = sample(&GaussianModel::brownian(1, 1.0).unwrap(), 1024, 22).unwrap();
        let field = AveragedDrift::smooth(&drift, w.clone(), 1).unwrap();
        let limit = reconstruct_solution(&solve(&field, &[0.0], &SolveConfig::default()).unwrap(), &w).unwrap();
        let diffs: Vec<f64> = [0.4, 0.2, 0.1]
            .iter()
            .map(|&eps| {
                let y = classical_solution(&drift.mollified(eps), &w, &[0.0], None, 1e-10).unwrap();
                (0..w.len())
                    .map(|i| (y.point(i)[0] + w.point(i)[0] - limit.point(i)[0]).abs())
                    .fold(0.0, f64::max)
            })
            .collect();
        assert!(diffs.windows(2).all(|p| p[1] < p[0]), "{diffs:?}");
    }

    #[test]
    fn out_of_box_is_reported() {
        let drift = SpectralDrift::scalar(1, Symbol::GaussianBump { amplitude: 1.0, width: 0.5, center: vec![0.0] })
            .unwrap()
            .mollified(0.01);
        let grid = crate::grid::TimeGrid::new(1.0, 8).unwrap();
        let w = SamplePath::zero(grid, 1);
        let freq = FrequencyGrid::new(16.0, 65, 1).unwrap();
        assert!(matches!(
            classical_solution(&drift, &w, &[50.0], Some(freq), 1e-8),
            Err(Error::OutOfBox { .. })
        ));
    }
}
